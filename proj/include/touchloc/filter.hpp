#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "touchloc/codebook.hpp"
#include "touchloc/pose.hpp"
#include "touchloc/rng.hpp"
#include "touchloc/surface.hpp"

namespace touchloc {

struct FilterConfig {
  std::size_t n0 = 50000;
  std::size_t n_min = 1000;
  double beta = 1.0;                 // prior scale; 3 sigma = beta * (M_diag, 180 deg)
  double tau = 0.05;                 // softmax temperature
  double sigma_trans = 0.5e-3;       // motion noise per axis, meters
  double sigma_rot = 0.0174532925199432957;  // motion noise per axis, radians (1 deg)
  double prune_distance = 2.0e-3;
  std::size_t resample_interval = 1;
  double dbscan_eps = 0.0;           // 0: 0.02 * M_diag
  std::size_t dbscan_min_pts = 0;    // 0: max(5, 1% of N_t)
  bool adapt = true;
  std::uint64_t seed = 0;

  void validate() const;
};

class ParticleDepletion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParticleSet {
  std::vector<Pose> poses;
  std::vector<double> weights;
  // Last codebook index matched by each particle; only a search hint.
  std::vector<std::size_t> hints;

  std::size_t size() const { return poses.size(); }
  std::size_t alive() const;
};

struct Hypothesis {
  Pose mean;
  Eigen::Vector3d std = Eigen::Vector3d::Zero();
  std::size_t count = 0;
};

struct HypothesisSet {
  std::vector<Hypothesis> hypotheses;
  double sigma = 0.0;  // mean positional spread over clusters
};

struct PoseErrors {
  double trans = 0.0;  // meters
  double rot = 0.0;    // degrees
};

/// Gaussian prior around `prior` with sigma_t = beta * diag / 3 and
/// sigma_r = beta * 60 deg per axis, snapped to the nearest codebook pose.
ParticleSet init_particles(const Pose& prior, double diagonal, const Codebook& cb,
                           const FilterConfig& cfg, Rng& rng);

/// x <- x * delta * N(0, diag(sigma_trans, sigma_rot)).
void motion_update(ParticleSet& ps, const Pose& delta, double sigma_trans, double sigma_rot, Rng& rng);

/// w_i <- w_i * exp((s_i - max s) / tau), normalized. Zero weights stay zero.
void apply_likelihood(std::vector<double>& weights, const std::vector<double>& scores, double tau);

/// Scores each particle by the similarity of `code` to the code stored at
/// its nearest codebook pose and applies the tempered softmax.
void measurement_update(ParticleSet& ps, const TactileCode& code, const Codebook& cb, double tau);

/// Zeroes particles farther than `max_distance` from the surface and
/// renormalizes. Returns the number of particles newly pruned.
std::size_t prune_off_surface(ParticleSet& ps, const SurfaceIndex& surface, double max_distance);

/// Systematic resampling with a single uniform offset; weights become 1/N.
void resample_low_variance(ParticleSet& ps, Rng& rng);

/// N <- clamp(round(N * sigma_now / sigma_prev), n_min, n0). Growth splits
/// the heaviest particles, shrinking drops the lightest.
void adapt_count(ParticleSet& ps, double sigma_prev, double sigma_now, const FilterConfig& cfg);

/// Sign-invariant average of unit quaternions (dominant eigenvector of the
/// sum of outer products).
Eigen::Quaterniond average_quaternion(const std::vector<Eigen::Quaterniond>& qs);

/// DBSCAN on live particle positions, then per-cluster mean pose and spread.
/// With no cluster, sigma falls back to the spread of all live particles.
HypothesisSet cluster_hypotheses(const ParticleSet& ps, double eps, std::size_t min_pts);

/// RMS translation and rotation error of the live particles.
PoseErrors particle_errors(const ParticleSet& ps, const Pose& gt);

/// Errors of the hypothesis closest to gt in translation; NaN if empty.
PoseErrors min_cluster_errors(const HypothesisSet& hyps, const Pose& gt);

struct StepLog {
  std::size_t step = 0;
  std::size_t n = 0;
  PoseErrors error;
  PoseErrors cluster_error;
  std::size_t hypotheses = 0;
  double sigma_h = 0.0;
  bool resampled = false;
  bool random_code = false;
  double wall_ms = 0.0;
};

struct Measurement {
  Pose delta;                        // relative sensor motion since the last step
  std::optional<TactileCode> code;   // nullopt: no contact
};

class ParticleFilter {
 public:
  ParticleFilter(const Codebook& cb, const SurfaceIndex& surface, FilterConfig cfg, const Pose& prior);

  /// One filter iteration. `gt`, when given, is used only for the logged
  /// errors. Throws ParticleDepletion naming the step index.
  StepLog step(const Measurement& m, const std::optional<Pose>& gt = std::nullopt);

  const ParticleSet& particles() const { return ps_; }
  const HypothesisSet& hypotheses() const { return hyps_; }
  const FilterConfig& config() const { return cfg_; }
  std::size_t steps() const { return step_; }
  double eps() const;
  std::size_t min_pts() const;

 private:
  const Codebook& cb_;
  const SurfaceIndex& surface_;
  FilterConfig cfg_;
  ParticleSet ps_;
  HypothesisSet hyps_;
  std::size_t step_ = 0;
};

}  // namespace touchloc
