#include "touchloc/path.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "touchloc/sampling.hpp"

namespace touchloc {
namespace {

// Largest change of heading per step while steering towards a waypoint.
constexpr double kMaxTurn = 25.0 * std::numbers::pi / 180.0;

Eigen::Vector3d tangent(const Eigen::Vector3d& v, const Eigen::Vector3d& n) {
  return v - v.dot(n) * n;
}

Eigen::Vector3d any_tangent(const Eigen::Vector3d& n) {
  return Pose::from_axes(n, Eigen::Vector3d::UnitX(), Eigen::Vector3d::Zero()).x_axis();
}

int local_edge(const Face& f, std::uint32_t a, std::uint32_t b) {
  for (int k = 0; k < 3; ++k) {
    const std::uint32_t p = f[k], q = f[(k + 1) % 3];
    if ((p == a && q == b) || (p == b && q == a)) return k;
  }
  return -1;
}

// Rotates unit vector `from` towards `to` (both tangent to n) by at most max_angle.
Eigen::Vector3d turn_towards(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                             const Eigen::Vector3d& n, double max_angle) {
  const double angle = std::atan2(from.cross(to).dot(n), from.dot(to));
  if (std::abs(angle) <= max_angle) return to;
  const double a = std::copysign(max_angle, angle);
  return (std::cos(a) * from + std::sin(a) * n.cross(from)).normalized();
}

Pose surface_pose(const TriMesh& m, const SurfacePoint& at, const Eigen::Vector3d& dir) {
  return Pose::from_axes(-m.normals[at.face], dir, at.point);
}

// Shared stepping loop. `next_target` is called when the current waypoint
// is reached or the walk stalls; it returns false when there is none.
std::vector<Pose> run_walk(const SurfaceIndex& surface, SurfacePoint at, double length,
                           double step, std::size_t stall_steps,
                           const std::function<bool(bool stalled, Eigen::Vector3d&)>& next_target) {
  if (!(step > 0.0)) throw PathError("path step must be positive");
  if (length < step) throw PathError("path length must be at least one step");
  const TriMesh& m = surface.mesh();

  Eigen::Vector3d target;
  bool have_target = next_target(false, target);
  Eigen::Vector3d n = m.normals[at.face];
  Eigen::Vector3d dir = have_target ? tangent(target - at.point, n) : Eigen::Vector3d::Zero();
  if (dir.norm() < 1e-12) dir = any_tangent(n);
  dir.normalize();

  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(std::ceil(length / step)) + 2);
  poses.push_back(surface_pose(m, at, dir));

  double best = have_target ? (target - at.point).norm() : 0.0;
  std::size_t since_progress = 0;
  double travelled = 0.0;
  while (travelled < length * (1.0 - 1e-12)) {
    const double ds = std::min(step, length - travelled);
    n = m.normals[at.face];
    if (have_target) {
      const Eigen::Vector3d desired = tangent(target - at.point, n);
      if (desired.norm() > 1e-12)
        dir = turn_towards(tangent(dir, n).normalized(), desired.normalized(), n, kMaxTurn);
    }
    const double moved = walk_straight(surface, at, dir, ds);
    if (moved < ds) dir = -dir;  // bounce off a boundary
    travelled += ds;
    poses.push_back(surface_pose(m, at, dir));

    if (!have_target) continue;
    const double dist = (target - at.point).norm();
    if (dist < best - 1e-9) {
      best = dist;
      since_progress = 0;
    } else {
      ++since_progress;
    }
    const bool reached = dist <= step;
    const bool stalled = since_progress >= stall_steps;
    if (reached || stalled) {
      have_target = next_target(stalled && !reached, target);
      if (have_target) best = (target - at.point).norm();
      since_progress = 0;
    }
  }
  return poses;
}

}  // namespace

double walk_straight(const SurfaceIndex& surface, SurfacePoint& at, Eigen::Vector3d& direction,
                     double distance) {
  const TriMesh& m = surface.mesh();
  std::uint32_t f = at.face;
  Eigen::Vector3d p = at.point;
  Eigen::Vector3d n = m.normals[f];
  Eigen::Vector3d dir = tangent(direction, n);
  if (dir.norm() < 1e-15) dir = any_tangent(n);
  dir.normalize();

  double remaining = distance;
  int entry = -1;
  for (int guard = 0; remaining > 0.0; ++guard) {
    if (guard > 1000000) throw PathError("surface walk did not terminate");
    const Face& tri = m.faces[f];
    const Eigen::Vector3d w = n.cross(dir);

    int exit_edge = -1;
    double exit_s = std::numeric_limits<double>::infinity();
    double exit_t = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (k == entry) continue;
      const Eigen::Vector3d& a = m.vertices[tri[k]];
      const Eigen::Vector3d& b = m.vertices[tri[(k + 1) % 3]];
      const double aw = (a - p).dot(w), bw = (b - p).dot(w);
      if ((aw > 0.0 && bw > 0.0) || (aw < 0.0 && bw < 0.0)) continue;
      const double denom = aw - bw;
      const double t = std::abs(denom) < 1e-300 ? 0.5 : std::clamp(aw / denom, 0.0, 1.0);
      const double s = (a + t * (b - a) - p).dot(dir);
      if (s < -1e-12) continue;
      if (s < exit_s) {
        exit_s = s;
        exit_edge = k;
        exit_t = t;
      }
    }
    if (exit_edge < 0 || exit_s >= remaining) {
      p += remaining * dir;
      remaining = 0.0;
      break;
    }

    const std::uint32_t va = tri[exit_edge], vb = tri[(exit_edge + 1) % 3];
    // Keep the crossing off the vertices so the next face has a clean exit.
    const double t = std::clamp(exit_t, 1e-9, 1.0 - 1e-9);
    const Eigen::Vector3d crossing = m.vertices[va] + t * (m.vertices[vb] - m.vertices[va]);
    remaining -= std::max(exit_s, 0.0);
    p = crossing;

    const std::int64_t g = surface.neighbor(f, exit_edge);
    if (g < 0) {
      at = {f, p};
      direction = dir;
      return distance - remaining;
    }
    const auto gf = static_cast<std::uint32_t>(g);
    const Eigen::Vector3d e = (m.vertices[vb] - m.vertices[va]).normalized();
    const Eigen::Vector3d& ng = m.normals[gf];
    const Eigen::Vector3d b1 = n.cross(e), b2 = ng.cross(e);
    dir = (dir.dot(e) * e + dir.dot(b1) * b2);
    dir = tangent(dir, ng);
    if (dir.norm() < 1e-15) dir = any_tangent(ng);
    dir.normalize();
    f = gf;
    n = ng;
    entry = local_edge(m.faces[f], va, vb);
  }
  at = {f, p};
  direction = dir;
  return distance;
}

std::vector<Pose> walk_path(const SurfaceIndex& surface, const std::vector<SurfacePoint>& waypoints,
                            double length, double step) {
  if (waypoints.empty()) throw PathError("walk_path needs at least one waypoint");
  std::size_t next = 1;
  auto targets = [&](bool /*stalled*/, Eigen::Vector3d& target) {
    if (next >= waypoints.size()) return false;
    target = waypoints[next++].point;
    return true;
  };
  return run_walk(surface, waypoints.front(), length, step,
                  std::numeric_limits<std::size_t>::max(), targets);
}

std::vector<Pose> geodesic_path(const SurfaceIndex& surface, Rng& rng, double length, double step,
                                const PathOptions& opts) {
  if (!(step > 0.0)) throw PathError("path step must be positive");
  const TriMesh& m = surface.mesh();
  std::vector<Eigen::Vector3d> waypoints;
  const SurfaceSample start = sample_surface_point(surface, rng);
  for (std::size_t k = 1; k < std::max<std::size_t>(opts.waypoints, 2); ++k)
    waypoints.push_back(sample_surface_point(surface, rng).point);

  std::size_t stall = opts.stall_steps;
  if (stall == 0)
    stall = std::max<std::size_t>(50, static_cast<std::size_t>(std::ceil(0.5 * m.diagonal / step)));

  std::size_t next = 0, retries = 0;
  auto targets = [&](bool stalled, Eigen::Vector3d& target) {
    if (stalled) {
      if (++retries > opts.max_retries)
        throw PathError("path walk trapped: no progress after " +
                        std::to_string(opts.max_retries) + " waypoint re-seeds");
      waypoints[next - 1] = sample_surface_point(surface, rng).point;
      target = waypoints[next - 1];
      return true;
    }
    retries = 0;
    if (next >= waypoints.size()) waypoints.push_back(sample_surface_point(surface, rng).point);
    target = waypoints[next++];
    return true;
  };
  return run_walk(surface, {start.face, start.point}, length, step, stall, targets);
}

}  // namespace touchloc
