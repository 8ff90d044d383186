#include <cmath>
#include <numbers>

#include "touchloc/mesh.hpp"

namespace touchloc::primitives {
namespace {

using Eigen::Vector3d;

struct Builder {
  std::vector<Vector3d> verts;
  std::vector<Face> faces;

  // Tessellates the parallelogram p0 + s u + t v; the face normal is u x v.
  void quad_grid(const Vector3d& p0, const Vector3d& u, const Vector3d& v, int nu, int nv) {
    const auto base = static_cast<std::uint32_t>(verts.size());
    for (int j = 0; j <= nv; ++j)
      for (int i = 0; i <= nu; ++i)
        verts.push_back(p0 + (static_cast<double>(i) / nu) * u + (static_cast<double>(j) / nv) * v);
    auto id = [&](int i, int j) { return base + static_cast<std::uint32_t>(j * (nu + 1) + i); };
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nu; ++i) {
        faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      }
  }

  TriMesh finish(const std::string& name) {
    TriMesh soup = make_mesh(std::move(verts), std::move(faces), name);
    return weld_vertices(soup, 1e-10);
  }
};

int divisions(double length, double resolution) {
  return std::max(1, static_cast<int>(std::ceil(length / resolution - 1e-9)));
}

}  // namespace

TriMesh box(const Vector3d& size, double resolution) {
  const Vector3d h = 0.5 * size;
  const int nx = divisions(size.x(), resolution);
  const int ny = divisions(size.y(), resolution);
  const int nz = divisions(size.z(), resolution);
  const Vector3d ex(size.x(), 0, 0), ey(0, size.y(), 0), ez(0, 0, size.z());
  Builder b;
  b.quad_grid({h.x(), -h.y(), -h.z()}, ey, ez, ny, nz);   // +x
  b.quad_grid({-h.x(), -h.y(), -h.z()}, ez, ey, nz, ny);  // -x
  b.quad_grid({-h.x(), h.y(), -h.z()}, ez, ex, nz, nx);   // +y
  b.quad_grid({-h.x(), -h.y(), -h.z()}, ex, ez, nx, nz);  // -y
  b.quad_grid({-h.x(), -h.y(), h.z()}, ex, ey, nx, ny);   // +z
  b.quad_grid({-h.x(), -h.y(), -h.z()}, ey, ex, ny, nx);  // -z
  return b.finish("box");
}

TriMesh plane(double size_x, double size_y, double resolution) {
  Builder b;
  b.quad_grid({-0.5 * size_x, -0.5 * size_y, 0.0}, {size_x, 0, 0}, {0, size_y, 0},
              divisions(size_x, resolution), divisions(size_y, resolution));
  return b.finish("plane");
}

TriMesh sphere(double radius, double resolution) {
  // Icosahedron, subdivided and re-projected until edges are short enough.
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vector3d> v = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                             {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                             {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p = radius * p.normalized();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  TriMesh mesh = make_mesh(v, f, "sphere");
  const double max_edge = std::sqrt(2.0) * resolution;
  while (mesh.longest_edge() > max_edge) {
    TriMesh finer = subdivide(mesh, mesh.longest_edge() * 0.75);
    for (auto& p : finer.vertices) p = radius * p.normalized();
    mesh = make_mesh(std::move(finer.vertices), std::move(finer.faces), "sphere");
  }
  return mesh;
}

TriMesh cylinder(double radius, double height, double resolution) {
  const int nt = std::max(8, divisions(2.0 * std::numbers::pi * radius, resolution));
  const int nz = divisions(height, resolution);
  const int nr = divisions(radius, resolution);
  Builder b;
  auto rim = [&](int i, double r, double z) {
    const double a = 2.0 * std::numbers::pi * (i % nt) / nt;
    return Vector3d(r * std::cos(a), r * std::sin(a), z);
  };
  // Side wall.
  for (int j = 0; j <= nz; ++j)
    for (int i = 0; i < nt; ++i) b.verts.push_back(rim(i, radius, -0.5 * height + height * j / nz));
  auto side = [&](int i, int j) { return static_cast<std::uint32_t>(j * nt + (i % nt)); };
  for (int j = 0; j < nz; ++j)
    for (int i = 0; i < nt; ++i) {
      b.faces.push_back({side(i, j), side(i + 1, j), side(i + 1, j + 1)});
      b.faces.push_back({side(i, j), side(i + 1, j + 1), side(i, j + 1)});
    }
  // Caps: concentric rings around a centre vertex.
  for (int cap = 0; cap < 2; ++cap) {
    const double z = cap == 0 ? 0.5 * height : -0.5 * height;
    const auto centre = static_cast<std::uint32_t>(b.verts.size());
    b.verts.emplace_back(0.0, 0.0, z);
    const auto ring0 = static_cast<std::uint32_t>(b.verts.size());
    for (int k = 1; k <= nr; ++k)
      for (int i = 0; i < nt; ++i) b.verts.push_back(rim(i, radius * k / nr, z));
    auto ring = [&](int k, int i) {
      return ring0 + static_cast<std::uint32_t>((k - 1) * nt + (i % nt));
    };
    auto tri = [&](std::uint32_t a, std::uint32_t c, std::uint32_t d) {
      if (cap == 0)
        b.faces.push_back({a, c, d});
      else
        b.faces.push_back({a, d, c});
    };
    for (int i = 0; i < nt; ++i) tri(centre, ring(1, i), ring(1, i + 1));
    for (int k = 1; k < nr; ++k)
      for (int i = 0; i < nt; ++i) {
        tri(ring(k, i), ring(k + 1, i), ring(k + 1, i + 1));
        tri(ring(k, i), ring(k + 1, i + 1), ring(k, i + 1));
      }
  }
  return b.finish("cylinder");
}

TriMesh l_bracket(double leg_a, double leg_b, double thickness, double width,
                  double resolution) {
  const double a = leg_a, bl = leg_b, t = thickness, w = width;
  const Vector3d shift(-0.5 * a, -0.5 * bl, -0.5 * w);
  Builder b;
  auto n = [&](double len) { return divisions(len, resolution); };
  const Vector3d ez(0, 0, w);

  // Caps: corner square plus two arms so that grid lines meet exactly.
  struct Rect {
    double x0, y0, x1, y1;
  };
  const Rect rects[] = {{0, 0, t, t}, {t, 0, a, t}, {0, t, t, bl}};
  for (const Rect& r : rects) {
    const Vector3d ux(r.x1 - r.x0, 0, 0), uy(0, r.y1 - r.y0, 0);
    const int nx = n(r.x1 - r.x0), ny = n(r.y1 - r.y0);
    b.quad_grid(shift + Vector3d(r.x0, r.y0, w), ux, uy, nx, ny);  // top, +z
    b.quad_grid(shift + Vector3d(r.x0, r.y0, 0), uy, ux, ny, nx);  // bottom, -z
  }

  // Side walls along the counter-clockwise outline, split where cap grids meet.
  const Eigen::Vector2d outline[] = {{0, 0}, {t, 0}, {a, 0}, {a, t}, {t, t},
                                     {t, bl}, {0, bl}, {0, t}, {0, 0}};
  for (int k = 0; k + 1 < 9; ++k) {
    const Eigen::Vector2d p = outline[k], q = outline[k + 1];
    const Vector3d u(q.x() - p.x(), q.y() - p.y(), 0);
    b.quad_grid(shift + Vector3d(p.x(), p.y(), 0), u, ez, n(u.norm()), n(w));
  }
  return b.finish("l_bracket");
}

TriMesh builtin(const std::string& name) {
  constexpr double res = 1e-3;
  if (name == "cube") return box({1.0, 1.0, 1.0}, 1.0);
  if (name == "box") return box({0.06, 0.04, 0.03}, res);
  if (name == "plane") return plane(0.05, 0.05, res);
  if (name == "sphere") return sphere(0.0375, res);
  if (name == "cylinder") return cylinder(0.0335, 0.101, res);
  if (name == "l_bracket") return l_bracket(0.06, 0.04, 0.01, 0.03, res);
  throw MeshError("unknown builtin mesh '" + name + "'");
}

std::vector<std::string> builtin_names() {
  return {"box", "cube", "cylinder", "l_bracket", "plane", "sphere"};
}

}  // namespace touchloc::primitives
