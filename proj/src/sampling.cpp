#include "touchloc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace touchloc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Cumulative distribution over weights; draw() returns an index.
class Discrete {
 public:
  explicit Discrete(std::vector<double> weights) : cdf_(std::move(weights)) {
    std::partial_sum(cdf_.begin(), cdf_.end(), cdf_.begin());
  }
  bool empty() const { return cdf_.empty() || !(cdf_.back() > 0.0); }
  std::size_t draw(Rng& rng) const {
    const double u = uniform(rng, 0.0, cdf_.back());
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

SurfaceSample point_on_face(const TriMesh& m, std::uint32_t f, Rng& rng) {
  double u = uniform(rng), v = uniform(rng);
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  const auto& t = m.faces[f];
  const Eigen::Vector3d p = m.vertices[t[0]] + u * (m.vertices[t[1]] - m.vertices[t[0]]) +
                            v * (m.vertices[t[2]] - m.vertices[t[0]]);
  return {p, m.normals[f], f, false};
}

std::vector<double> face_areas(const TriMesh& m) {
  std::vector<double> a(m.faces.size());
  for (std::size_t f = 0; f < a.size(); ++f) a[f] = m.face_area(f);
  return a;
}

// Sensor frame for contact with outward normal n: z = -n, random roll, then
// a tilt of the z axis by a truncated-normal cone angle in a random direction.
Eigen::Quaterniond contact_rotation(const Eigen::Vector3d& n, Rng& rng,
                                    const ContactSamplingOptions& o) {
  const Pose base = Pose::from_axes(-n, Eigen::Vector3d::UnitX(), Eigen::Vector3d::Zero());
  const double roll = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  Eigen::Quaterniond q = base.rotation() * Eigen::Quaterniond(Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()));

  const double sigma = o.tilt_sigma_deg * kDeg;
  double tilt = 0.0;
  if (sigma > 0.0) {
    const double limit = o.tilt_clip_sigmas * sigma;
    do {
      tilt = gaussian(rng, sigma);
    } while (o.tilt_clip_sigmas > 0.0 && std::abs(tilt) > limit);
  }
  const double azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector3d axis =
      std::cos(azimuth) * base.x_axis() + std::sin(azimuth) * base.y_axis();
  q = Eigen::Quaterniond(Eigen::AngleAxisd(tilt, axis)) * q;
  return canonical(q);
}

}  // namespace

SurfaceSample sample_surface_point(const SurfaceIndex& surface, Rng& rng) {
  const Discrete faces(face_areas(surface.mesh()));
  return point_on_face(surface.mesh(), static_cast<std::uint32_t>(faces.draw(rng)), rng);
}

std::vector<ContactSample> sample_contact_poses(const SurfaceIndex& surface, std::size_t count,
                                                Rng& rng, const ContactSamplingOptions& opts) {
  if (count == 0) return {};
  const TriMesh& m = surface.mesh();
  if (m.faces.empty()) throw MeshError("sample_contact_poses: mesh has no faces");

  const Discrete faces(face_areas(m));
  std::vector<const MeshEdge*> features;
  std::vector<double> lengths;
  for (const MeshEdge& e : surface.edges())
    if (e.f1 >= 0 && e.dihedral > opts.edge_angle_deg * kDeg) {
      features.push_back(&e);
      lengths.push_back((m.vertices[e.v1] - m.vertices[e.v0]).norm());
    }
  const Discrete edges(lengths);

  std::vector<ContactSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SurfaceSample s;
    if (!edges.empty() && uniform(rng) < opts.edge_fraction) {
      const MeshEdge& e = *features[edges.draw(rng)];
      const double t = uniform(rng);
      s.point = (1.0 - t) * m.vertices[e.v0] + t * m.vertices[e.v1];
      s.normal = (m.normals[e.f0] + m.normals[static_cast<std::size_t>(e.f1)]).normalized();
      s.face = e.f0;
      s.on_feature_edge = true;
      if (!s.normal.allFinite()) s.normal = m.normals[e.f0];
    } else {
      s = point_on_face(m, static_cast<std::uint32_t>(faces.draw(rng)), rng);
    }
    ContactSample c;
    c.surface = s;
    c.penetration = uniform(rng, opts.penetration_min, opts.penetration_max);
    c.pose = Pose(contact_rotation(s.normal, rng, opts), s.point - c.penetration * s.normal);
    out.push_back(c);
  }

  const auto lifted =
      static_cast<std::size_t>(std::floor(opts.no_contact_fraction * static_cast<double>(count)));
  if (lifted > 0) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < lifted; ++k) {
      ContactSample& c = out[idx[k]];
      c.contact = false;
      c.penetration = 0.0;
      c.pose = Pose(c.pose.rotation(),
                    c.surface.point + (opts.no_contact_offset + opts.penetration_max) * c.surface.normal);
    }
  }
  return out;
}

}  // namespace touchloc
