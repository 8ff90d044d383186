#pragma once

#include <stdexcept>
#include <vector>

#include "touchloc/pose.hpp"
#include "touchloc/rng.hpp"
#include "touchloc/surface.hpp"

namespace touchloc {

class PathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Point on a mesh face.
struct SurfacePoint {
  std::uint32_t face = 0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

struct PathOptions {
  std::size_t waypoints = 5;       // random waypoints drawn up front; more are added as needed
  std::size_t max_retries = 20;    // waypoint re-seeds before giving up
  std::size_t stall_steps = 0;     // steps without progress before re-seeding; 0 = automatic
};

/// Sliding path of total surface arc length `length`, sampled every `step`
/// meters. Pose translations lie on the surface; z = -face normal and x is
/// the direction of travel.
std::vector<Pose> geodesic_path(const SurfaceIndex& surface, Rng& rng, double length, double step,
                                const PathOptions& opts = {});

/// Same walk through caller-chosen waypoints. After the last waypoint the
/// walk continues straight.
std::vector<Pose> walk_path(const SurfaceIndex& surface, const std::vector<SurfacePoint>& waypoints,
                            double length, double step);

/// Straightest walk of `distance` from `at` along `direction`, unfolding
/// across edges; `at` and `direction` are updated in place. Returns the
/// distance covered, which is short of `distance` only at a boundary edge.
double walk_straight(const SurfaceIndex& surface, SurfacePoint& at, Eigen::Vector3d& direction,
                     double distance);

}  // namespace touchloc
