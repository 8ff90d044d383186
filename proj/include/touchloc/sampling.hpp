#pragma once

#include <cstddef>
#include <vector>

#include "touchloc/pose.hpp"
#include "touchloc/rng.hpp"
#include "touchloc/surface.hpp"

namespace touchloc {

struct SurfaceSample {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // outward, unit
  std::uint32_t face = 0;
  bool on_feature_edge = false;
};

/// Area-uniform point on the mesh.
SurfaceSample sample_surface_point(const SurfaceIndex& surface, Rng& rng);

struct ContactSamplingOptions {
  double edge_angle_deg = 10.0;      // feature edge when the dihedral exceeds this
  double edge_fraction = 0.25;       // share of samples placed on feature edges
  double tilt_sigma_deg = 5.0;       // cone angle noise around the normal
  double tilt_clip_sigmas = 3.0;     // truncation of the cone angle
  double penetration_min = 0.5e-3;
  double penetration_max = 2.0e-3;
  double no_contact_fraction = 0.02;
  double no_contact_offset = 5e-3;   // lift above the surface, meters
};

struct ContactSample {
  Pose pose;                 // sensor pose; z axis points into the object
  double penetration = 0.0;  // 0 for lifted samples
  bool contact = true;
  SurfaceSample surface;
};

/// Random sensor poses touching the mesh. Exactly
/// floor(no_contact_fraction * count) samples are lifted off the surface.
std::vector<ContactSample> sample_contact_poses(const SurfaceIndex& surface, std::size_t count,
                                                Rng& rng,
                                                const ContactSamplingOptions& opts = {});

}  // namespace touchloc
