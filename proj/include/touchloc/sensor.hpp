#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "touchloc/pose.hpp"
#include "touchloc/rng.hpp"
#include "touchloc/surface.hpp"

namespace touchloc {

enum class Projection { Orthographic };

/// Gel geometry and image grid of the simulated touch sensor. The gel plane
/// is z = 0 in the sensor frame and the object lies towards +z.
struct SensorConfig {
  double half_width = 10.0e-3;   // along sensor x
  double half_height = 7.5e-3;   // along sensor y
  int width = 160;               // pixels along x
  int height = 120;              // pixels along y
  double max_penetration = 2.0e-3;
  double mask_threshold = 0.05e-3;
  double ray_length = 20.0e-3;   // reach of the inside/outside test beyond the gel
  double noise_sigma = 0.0;      // optional Gaussian depth noise, meters
  Projection projection = Projection::Orthographic;

  void validate() const;
  double pixel_width() const { return 2.0 * half_width / width; }
  double pixel_height() const { return 2.0 * half_height / height; }
  double pixel_area() const { return pixel_width() * pixel_height(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  Eigen::Vector2d pixel_center(int col, int row) const {
    return {-half_width + (col + 0.5) * pixel_width(), -half_height + (row + 0.5) * pixel_height()};
  }
};

/// Penetration depth per pixel, row-major, meters. Zero means no contact.
struct Heightmap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;

  Heightmap() = default;
  Heightmap(int w, int h) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0) {}
  double at(int col, int row) const { return depth[static_cast<std::size_t>(row) * width + col]; }
  double& at(int col, int row) { return depth[static_cast<std::size_t>(row) * width + col]; }
};

struct ContactMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  std::size_t count() const;
};

/// Points as (x, y, penetration): x, y in the sensor frame, z the depth of
/// the surface below the gel plane. All lie in [-hw, hw] x [-hh, hh] x [0, max_pen].
using PointCloud = std::vector<Eigen::Vector3d>;

struct Contact {
  ContactMask mask;
  PointCloud cloud;
};

/// Depth image of the mesh patch pressed into the gel at `pose`, by parallel
/// rays along sensor +z starting at the back of the gel.
Heightmap render_touch(const SurfaceIndex& surface, const Pose& pose, const SensorConfig& cfg);

/// Thresholds the heightmap and unprojects masked pixels.
Contact extract_contact(const Heightmap& hm, const SensorConfig& cfg);

/// Adds N(0, sigma) to contact pixels, clamped to [0, max_penetration].
void add_depth_noise(Heightmap& hm, double sigma, Rng& rng, const SensorConfig& cfg);

/// Contact area in square meters.
double contact_area(const ContactMask& mask, const SensorConfig& cfg);

/// 16-bit binary PGM with depths in micrometers.
void write_pgm(const Heightmap& hm, const std::filesystem::path& path);
Heightmap read_pgm(const std::filesystem::path& path);

/// ASCII PLY point cloud.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace touchloc
