#include "touchloc/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace touchloc {

void SensorConfig::validate() const {
  if (!(half_width > 0.0 && half_height > 0.0))
    throw std::invalid_argument("sensor extents must be positive");
  if (width < 8 || height < 8) throw std::invalid_argument("sensor resolution must be at least 8x8");
  if (!(max_penetration > 0.0)) throw std::invalid_argument("max penetration must be positive");
  if (mask_threshold < 0.0) throw std::invalid_argument("mask threshold must be non-negative");
  if (!(ray_length > 0.0)) throw std::invalid_argument("ray length must be positive");
}

std::size_t ContactMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Heightmap render_touch(const SurfaceIndex& surface, const Pose& pose, const SensorConfig& cfg) {
  const TriMesh& m = surface.mesh();
  const Eigen::Matrix3d rt = pose.rotation_matrix().transpose();
  const Eigen::Vector3d t = pose.translation();
  const double z_near = -cfg.max_penetration;
  const double z_far = cfg.ray_length;

  Eigen::AlignedBox3d world;
  world.setEmpty();
  for (int c = 0; c < 8; ++c) {
    const Eigen::Vector3d corner((c & 1) ? cfg.half_width : -cfg.half_width,
                                 (c & 2) ? cfg.half_height : -cfg.half_height,
                                 (c & 4) ? z_far : -z_far);
    world.extend(pose * corner);
  }

  const std::size_t npix = cfg.pixel_count();
  std::vector<double> zbuf(npix, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> front(npix, 0);
  // Last surface crossing behind the gel, for pressing beyond max penetration.
  std::vector<double> zbehind(npix, -std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> front_behind(npix, 0);
  const double pw = cfg.pixel_width(), ph = cfg.pixel_height();

  surface.for_each_face_in(world, [&](std::uint32_t f) {
    const Face& tri = m.faces[f];
    Eigen::Vector3d v[3];
    for (int k = 0; k < 3; ++k) v[k] = rt * (m.vertices[tri[k]] - t);
    const double nz = (rt * m.normals[f]).z();
    if (std::abs(nz) < 1e-12) return;  // edge-on
    const double zmin = std::min({v[0].z(), v[1].z(), v[2].z()});
    const double zmax = std::max({v[0].z(), v[1].z(), v[2].z()});
    if (zmax < -z_far || zmin > z_far) return;

    const double xmin = std::min({v[0].x(), v[1].x(), v[2].x()});
    const double xmax = std::max({v[0].x(), v[1].x(), v[2].x()});
    const double ymin = std::min({v[0].y(), v[1].y(), v[2].y()});
    const double ymax = std::max({v[0].y(), v[1].y(), v[2].y()});
    const int c0 = std::max(0, static_cast<int>(std::ceil((xmin + cfg.half_width) / pw - 0.5)));
    const int c1 = std::min(cfg.width - 1, static_cast<int>(std::floor((xmax + cfg.half_width) / pw - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil((ymin + cfg.half_height) / ph - 0.5)));
    const int r1 = std::min(cfg.height - 1, static_cast<int>(std::floor((ymax + cfg.half_height) / ph - 0.5)));
    if (c0 > c1 || r0 > r1) return;

    const Eigen::Vector2d a = v[0].head<2>(), b = v[1].head<2>(), c = v[2].head<2>();
    auto cross2 = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      return p.x() * q.y() - p.y() * q.x();
    };
    const double area2 = cross2(b - a, c - a);
    if (std::abs(area2) < 1e-30) return;
    const double eps = -1e-12;
    const std::uint8_t is_front = nz < 0.0 ? 1 : 0;
    for (int row = r0; row <= r1; ++row)
      for (int col = c0; col <= c1; ++col) {
        const Eigen::Vector2d p = cfg.pixel_center(col, row);
        const double w0 = cross2(b - p, c - p) / area2;
        const double w1 = cross2(c - p, a - p) / area2;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < eps || w1 < eps || w2 < eps) continue;
        const double z = w0 * v[0].z() + w1 * v[1].z() + w2 * v[2].z();
        if (z < -z_far || z > z_far) continue;
        const std::size_t idx = static_cast<std::size_t>(row) * cfg.width + col;
        if (z < z_near) {
          if (z > zbehind[idx]) {
            zbehind[idx] = z;
            front_behind[idx] = is_front;
          }
        } else if (z < zbuf[idx]) {
          zbuf[idx] = z;
          front[idx] = is_front;
        }
      }
  });

  Heightmap hm(cfg.width, cfg.height);
  for (std::size_t i = 0; i < npix; ++i) {
    if (!std::isfinite(zbuf[i])) {
      if (front_behind[i]) hm.depth[i] = cfg.max_penetration;
      continue;
    }
    // First hit leaving the object: the ray started inside it.
    hm.depth[i] = front[i] ? std::clamp(-zbuf[i], 0.0, cfg.max_penetration) : cfg.max_penetration;
  }
  return hm;
}

Contact extract_contact(const Heightmap& hm, const SensorConfig& cfg) {
  if (hm.width != cfg.width || hm.height != cfg.height)
    throw std::invalid_argument("heightmap size does not match sensor config");
  Contact out;
  out.mask.width = hm.width;
  out.mask.height = hm.height;
  out.mask.mask.assign(hm.depth.size(), 0);
  for (int row = 0; row < hm.height; ++row)
    for (int col = 0; col < hm.width; ++col) {
      const double d = hm.at(col, row);
      if (!(d > cfg.mask_threshold)) continue;
      out.mask.mask[static_cast<std::size_t>(row) * hm.width + col] = 1;
      const Eigen::Vector2d xy = cfg.pixel_center(col, row);
      out.cloud.emplace_back(xy.x(), xy.y(), d);
    }
  return out;
}

void add_depth_noise(Heightmap& hm, double sigma, Rng& rng, const SensorConfig& cfg) {
  if (!(sigma > 0.0)) return;
  for (double& d : hm.depth)
    if (d > 0.0) d = std::clamp(d + gaussian(rng, sigma), 0.0, cfg.max_penetration);
}

double contact_area(const ContactMask& mask, const SensorConfig& cfg) {
  return static_cast<double>(mask.count()) * cfg.pixel_area();
}

void write_pgm(const Heightmap& hm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "P5\n" << hm.width << ' ' << hm.height << "\n65535\n";
  for (double d : hm.depth) {
    const auto um = static_cast<std::uint16_t>(std::clamp(std::lround(d * 1e6), 0L, 65535L));
    const char be[2] = {static_cast<char>(um >> 8), static_cast<char>(um & 0xff)};
    out.write(be, 2);
  }
}

Heightmap read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 65535)
    throw std::runtime_error(path.string() + ": not a 16-bit binary PGM");
  Heightmap hm(w, h);
  for (double& d : hm.depth) {
    unsigned char be[2];
    if (!in.read(reinterpret_cast<char*>(be), 2))
      throw std::runtime_error(path.string() + ": truncated PGM");
    d = ((be[0] << 8) | be[1]) * 1e-6;
  }
  return hm;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out.precision(9);
  for (const auto& p : cloud) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

}  // namespace touchloc
