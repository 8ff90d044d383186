#include "touchloc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace touchloc {

double TriMesh::face_area(std::size_t f) const {
  const Face& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

double TriMesh::longest_edge() const {
  double e = 0.0;
  for (const Face& t : faces)
    for (int k = 0; k < 3; ++k)
      e = std::max(e, (vertices[t[k]] - vertices[t[(k + 1) % 3]]).norm());
  return e;
}

TriMesh make_mesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces,
                  std::string name) {
  TriMesh mesh;
  mesh.name = std::move(name);
  for (const auto& v : vertices)
    if (!v.allFinite()) throw MeshError("mesh has a non-finite vertex coordinate");

  mesh.faces.reserve(faces.size());
  mesh.normals.reserve(faces.size());
  for (const Face& f : faces) {
    for (std::uint32_t idx : f)
      if (idx >= vertices.size())
        throw MeshError("face index " + std::to_string(idx) + " out of range (" +
                        std::to_string(vertices.size()) + " vertices)");
    const Eigen::Vector3d n =
        (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    const double len = n.norm();
    // Relative threshold so that millimetre-scale meshes keep their faces.
    const double scale = std::max({(vertices[f[1]] - vertices[f[0]]).squaredNorm(),
                                   (vertices[f[2]] - vertices[f[0]]).squaredNorm(), 1e-300});
    if (!(len > 1e-12 * scale)) continue;
    mesh.faces.push_back(f);
    mesh.normals.push_back(n / len);
  }
  if (mesh.faces.empty()) throw MeshError("mesh has no non-degenerate faces");

  mesh.vertices = std::move(vertices);
  mesh.bounds.setEmpty();
  for (const auto& v : mesh.vertices) mesh.bounds.extend(v);
  mesh.diagonal = mesh.bounds.diagonal().norm();
  if (!(mesh.diagonal > 0.0)) throw MeshError("mesh has zero extent");
  return mesh;
}

TriMesh weld_vertices(const TriMesh& mesh, double tolerance) {
  // Quantize to a grid of `tolerance`, then merge within neighbouring cells.
  using Cell = std::array<std::int64_t, 3>;
  struct CellHash {
    std::size_t operator()(const Cell& c) const {
      std::uint64_t h = 1469598103934665603ULL;
      for (auto v : c) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ULL;
      return static_cast<std::size_t>(h);
    }
  };
  const double q = tolerance > 0 ? tolerance : 1e-12;
  std::unordered_map<Cell, std::vector<std::uint32_t>, CellHash> grid;
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d& v = mesh.vertices[i];
    const Cell c{static_cast<std::int64_t>(std::floor(v.x() / q)),
                 static_cast<std::int64_t>(std::floor(v.y() / q)),
                 static_cast<std::int64_t>(std::floor(v.z() / q))};
    std::int64_t found = -1;
    for (int dx = -1; dx <= 1 && found < 0; ++dx)
      for (int dy = -1; dy <= 1 && found < 0; ++dy)
        for (int dz = -1; dz <= 1 && found < 0; ++dz) {
          auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t j : it->second)
            if ((verts[j] - v).norm() <= tolerance) {
              found = j;
              break;
            }
        }
    if (found < 0) {
      found = static_cast<std::int64_t>(verts.size());
      verts.push_back(v);
      grid[c].push_back(static_cast<std::uint32_t>(found));
    }
    remap[i] = static_cast<std::uint32_t>(found);
  }
  std::vector<Face> faces;
  faces.reserve(mesh.faces.size());
  for (const Face& f : mesh.faces) {
    Face g{remap[f[0]], remap[f[1]], remap[f[2]]};
    if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
    faces.push_back(g);
  }
  return make_mesh(std::move(verts), std::move(faces), mesh.name);
}

TriMesh subdivide(const TriMesh& mesh, double max_edge) {
  if (!(max_edge > 0.0)) throw MeshError("subdivide: max_edge must be positive");
  TriMesh current = mesh;
  while (current.longest_edge() > max_edge) {
    std::vector<Eigen::Vector3d> verts = current.vertices;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoints.try_emplace({key.first, key.second}, 0u);
      if (inserted) {
        it->second = static_cast<std::uint32_t>(verts.size());
        verts.push_back(0.5 * (current.vertices[a] + current.vertices[b]));
      }
      return it->second;
    };
    std::vector<Face> faces;
    faces.reserve(current.faces.size() * 4);
    for (const Face& f : current.faces) {
      const std::uint32_t ab = midpoint(f[0], f[1]);
      const std::uint32_t bc = midpoint(f[1], f[2]);
      const std::uint32_t ca = midpoint(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({ab, f[1], bc});
      faces.push_back({ca, bc, f[2]});
      faces.push_back({ab, bc, ca});
    }
    current = make_mesh(std::move(verts), std::move(faces), mesh.name);
  }
  return current;
}

TriMesh load_mesh_source(const std::string& source, double max_edge) {
  const std::string prefix = "builtin:";
  if (source.rfind(prefix, 0) == 0) return primitives::builtin(source.substr(prefix.size()));
  TriMesh mesh = load_mesh(source);
  if (max_edge > 0.0 && mesh.longest_edge() > max_edge) mesh = subdivide(mesh, max_edge);
  return mesh;
}

}  // namespace touchloc
