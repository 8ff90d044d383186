#include "touchloc/filter.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "touchloc/dbscan.hpp"

namespace touchloc {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void normalize_or_throw(std::vector<double>& w, const char* what) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(sum > 0.0) || !std::isfinite(sum)) throw ParticleDepletion(std::string("particle depletion: ") + what);
  for (double& v : w) v /= sum;
}

// Offsets from the first point keep coincident points exactly coincident.
Eigen::Vector3d centroid(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : pts) sum += p - pts.front();
  return pts.front() + sum / static_cast<double>(pts.size());
}

Eigen::Vector3d position_std(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& mean) {
  Eigen::Vector3d var = Eigen::Vector3d::Zero();
  for (const auto& p : pts) var += (p - mean).cwiseAbs2();
  return (var / static_cast<double>(pts.size())).cwiseSqrt();
}

double spread(const Eigen::Vector3d& std) { return std::sqrt(std.squaredNorm() / 3.0); }

}  // namespace

void FilterConfig::validate() const {
  if (n0 < 1 || n_min < 1 || n_min > n0) throw std::invalid_argument("need 1 <= n_min <= n0");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(prune_distance > 0.0)) throw std::invalid_argument("prune distance must be positive");
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  if (sigma_trans < 0.0 || sigma_rot < 0.0) throw std::invalid_argument("motion noise must be non-negative");
  if (resample_interval < 1) throw std::invalid_argument("resample interval must be at least 1");
  if (dbscan_eps < 0.0) throw std::invalid_argument("dbscan eps must be non-negative");
}

std::size_t ParticleSet::alive() const {
  return static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
}

ParticleSet init_particles(const Pose& prior, double diagonal, const Codebook& cb,
                           const FilterConfig& cfg, Rng& rng) {
  cfg.validate();
  const double st = cfg.beta * diagonal / 3.0;
  const double sr = cfg.beta * std::numbers::pi / 3.0;
  ParticleSet ps;
  ps.poses.reserve(cfg.n0);
  ps.hints.reserve(cfg.n0);
  for (std::size_t i = 0; i < cfg.n0; ++i) {
    const Eigen::Vector3d dt = gaussian3(rng, st);
    const Eigen::Vector3d dr = gaussian3(rng, sr);
    const Pose draw(prior.rotation() * rot_exp(dr), prior.translation() + dt);
    const std::size_t m = cb.nearest_index(draw);
    ps.poses.push_back(cb.pose(m));
    ps.hints.push_back(m);
  }
  ps.weights.assign(cfg.n0, 1.0 / static_cast<double>(cfg.n0));
  return ps;
}

void motion_update(ParticleSet& ps, const Pose& delta, double sigma_trans, double sigma_rot, Rng& rng) {
  const bool noisy = sigma_trans > 0.0 || sigma_rot > 0.0;
  for (Pose& x : ps.poses) {
    if (!noisy) {
      x = x * delta;
      continue;
    }
    const Eigen::Vector3d nt = gaussian3(rng, sigma_trans);
    const Eigen::Vector3d nr = gaussian3(rng, sigma_rot);
    x = x * delta * Pose(rot_exp(nr), nt);
  }
}

void apply_likelihood(std::vector<double>& weights, const std::vector<double>& scores, double tau) {
  if (weights.empty()) throw std::invalid_argument("empty particle set");
  if (scores.size() != weights.size()) throw std::invalid_argument("score count does not match particles");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) top = std::max(top, scores[i]);
  if (!std::isfinite(top)) throw ParticleDepletion("particle depletion: no live particles");
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) weights[i] *= std::exp((scores[i] - top) / tau);
  normalize_or_throw(weights, "likelihood vanished");
}

void measurement_update(ParticleSet& ps, const TactileCode& code, const Codebook& cb, double tau) {
  if (ps.size() == 0) throw std::invalid_argument("empty particle set");
  const Eigen::VectorXd sims = cb.similarities(code);
  if (ps.hints.size() != ps.size()) ps.hints.assign(ps.size(), 0);
  std::vector<double> scores(ps.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(ps.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(ps.weights[k] > 0.0)) continue;
    const std::size_t m = cb.nearest_index(ps.poses[k], ps.hints[k]);
    ps.hints[k] = m;
    scores[k] = sims[static_cast<Eigen::Index>(m)];
  }
  apply_likelihood(ps.weights, scores, tau);
}

std::size_t prune_off_surface(ParticleSet& ps, const SurfaceIndex& surface, double max_distance) {
  const auto n = static_cast<std::ptrdiff_t>(ps.size());
  std::vector<std::uint8_t> drop(ps.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (ps.weights[k] > 0.0 && surface.surface_distance(ps.poses[k].translation()) > max_distance)
      drop[k] = 1;
  }
  std::size_t pruned = 0;
  for (std::size_t k = 0; k < ps.size(); ++k)
    if (drop[k]) {
      ps.weights[k] = 0.0;
      ++pruned;
    }
  normalize_or_throw(ps.weights, "every particle is off the surface");
  return pruned;
}

void resample_low_variance(ParticleSet& ps, Rng& rng) {
  const std::size_t n = ps.size();
  if (n == 0) throw std::invalid_argument("empty particle set");
  const double total = std::accumulate(ps.weights.begin(), ps.weights.end(), 0.0);
  if (!(total > 0.0)) throw ParticleDepletion("particle depletion: all weights are zero");
  if (ps.hints.size() != n) ps.hints.assign(n, 0);

  const double u = uniform(rng);
  ParticleSet out;
  out.poses.reserve(n);
  out.hints.reserve(n);
  double cumulative = ps.weights[0] / total;
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = (u + static_cast<double>(j)) / static_cast<double>(n);
    // Slot j falls in particle i when C_{i-1} <= target < C_i.
    while (target >= cumulative && i + 1 < n) cumulative += ps.weights[++i] / total;
    out.poses.push_back(ps.poses[i]);
    out.hints.push_back(ps.hints[i]);
  }
  out.weights.assign(n, 1.0 / static_cast<double>(n));
  ps = std::move(out);
}

void adapt_count(ParticleSet& ps, double sigma_prev, double sigma_now, const FilterConfig& cfg) {
  if (!(sigma_prev > 0.0) || !(sigma_now > 0.0) || !std::isfinite(sigma_prev) || !std::isfinite(sigma_now))
    return;
  const std::size_t n = ps.size();
  if (n == 0) return;
  if (ps.hints.size() != n) ps.hints.assign(n, 0);
  const double raw = std::round(static_cast<double>(n) * sigma_now / sigma_prev);
  const auto target = static_cast<std::size_t>(
      std::clamp(raw, static_cast<double>(cfg.n_min), static_cast<double>(cfg.n0)));
  if (target == n) return;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ps.weights[a] > ps.weights[b]; });

  if (target > n) {
    std::vector<std::size_t> copies(n, 1);
    for (std::size_t k = 0; k < target - n; ++k) ++copies[order[k % n]];
    ParticleSet out;
    out.poses = ps.poses;
    out.hints = ps.hints;
    out.weights = ps.weights;
    for (std::size_t i = 0; i < n; ++i) out.weights[i] = ps.weights[i] / static_cast<double>(copies[i]);
    for (std::size_t k = 0; k < target - n; ++k) {
      const std::size_t i = order[k % n];
      out.poses.push_back(ps.poses[i]);
      out.hints.push_back(ps.hints[i]);
      out.weights.push_back(out.weights[i]);
    }
    ps = std::move(out);
  } else {
    std::vector<std::uint8_t> keep(n, 0);
    for (std::size_t k = 0; k < target; ++k) keep[order[k]] = 1;
    ParticleSet out;
    for (std::size_t i = 0; i < n; ++i)
      if (keep[i]) {
        out.poses.push_back(ps.poses[i]);
        out.hints.push_back(ps.hints[i]);
        out.weights.push_back(ps.weights[i]);
      }
    ps = std::move(out);
  }
  normalize_or_throw(ps.weights, "no weight left after adapting the particle count");
}

Eigen::Quaterniond average_quaternion(const std::vector<Eigen::Quaterniond>& qs) {
  if (qs.empty()) return Eigen::Quaterniond::Identity();
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  for (const auto& q : qs) {
    const Eigen::Vector4d v = q.normalized().coeffs();
    acc += v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(acc);
  const Eigen::Vector4d top = es.eigenvectors().col(3);
  return canonical(Eigen::Quaterniond(top[3], top[0], top[1], top[2]));
}

HypothesisSet cluster_hypotheses(const ParticleSet& ps, double eps, std::size_t min_pts) {
  std::vector<std::size_t> live;
  std::vector<Eigen::Vector3d> pts;
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps.weights[i] > 0.0) {
      live.push_back(i);
      pts.push_back(ps.poses[i].translation());
    }
  HypothesisSet out;
  if (pts.empty()) return out;

  const DbscanResult db = dbscan(pts, eps, min_pts);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(db.clusters));
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (db.labels[k] >= 0) members[static_cast<std::size_t>(db.labels[k])].push_back(k);

  double sigma_sum = 0.0;
  for (const auto& mem : members) {
    std::vector<Eigen::Vector3d> cp;
    std::vector<Eigen::Quaterniond> cq;
    for (std::size_t k : mem) {
      cp.push_back(pts[k]);
      cq.push_back(ps.poses[live[k]].rotation());
    }
    const Eigen::Vector3d mean = centroid(cp);
    Hypothesis h;
    h.mean = Pose(average_quaternion(cq), mean);
    h.std = position_std(cp, mean);
    h.count = mem.size();
    sigma_sum += spread(h.std);
    out.hypotheses.push_back(h);
  }
  if (!out.hypotheses.empty()) {
    out.sigma = sigma_sum / static_cast<double>(out.hypotheses.size());
  } else {
    out.sigma = spread(position_std(pts, centroid(pts)));
  }
  return out;
}

PoseErrors particle_errors(const ParticleSet& ps, const Pose& gt) {
  double st = 0.0, sr = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!(ps.weights[i] > 0.0)) continue;
    st += (ps.poses[i].translation() - gt.translation()).squaredNorm();
    const double a = rotation_angle(ps.poses[i].rotation(), gt.rotation()) * kRadToDeg;
    sr += a * a;
    ++n;
  }
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return {std::sqrt(st / static_cast<double>(n)), std::sqrt(sr / static_cast<double>(n))};
}

PoseErrors min_cluster_errors(const HypothesisSet& hyps, const Pose& gt) {
  PoseErrors best{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& h : hyps.hypotheses) {
    const double t = (h.mean.translation() - gt.translation()).norm();
    if (t < best_t) {
      best_t = t;
      best = {t, rotation_angle(h.mean.rotation(), gt.rotation()) * kRadToDeg};
    }
  }
  return best;
}

ParticleFilter::ParticleFilter(const Codebook& cb, const SurfaceIndex& surface, FilterConfig cfg,
                               const Pose& prior)
    : cb_(cb), surface_(surface), cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_rng(cfg_.seed, {0});
  ps_ = init_particles(prior, surface_.mesh().diagonal, cb_, cfg_, rng);
  hyps_ = cluster_hypotheses(ps_, eps(), min_pts());
}

double ParticleFilter::eps() const {
  return cfg_.dbscan_eps > 0.0 ? cfg_.dbscan_eps : 0.02 * surface_.mesh().diagonal;
}

std::size_t ParticleFilter::min_pts() const {
  if (cfg_.dbscan_min_pts > 0) return cfg_.dbscan_min_pts;
  return std::max<std::size_t>(5, ps_.size() / 100);
}

StepLog ParticleFilter::step(const Measurement& m, const std::optional<Pose>& gt) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t t = ++step_;
  StepLog log;
  log.step = t;
  try {
    Rng motion_rng = make_rng(cfg_.seed, {1, t});
    motion_update(ps_, m.delta, cfg_.sigma_trans, cfg_.sigma_rot, motion_rng);

    TactileCode code;
    if (m.code) {
      code = *m.code;
    } else {
      Rng code_rng = make_rng(cfg_.seed, {2, t});
      code = random_code(cb_.dim(), code_rng);
      log.random_code = true;
    }
    measurement_update(ps_, code, cb_, cfg_.tau);
    prune_off_surface(ps_, surface_, cfg_.prune_distance);

    if (t % cfg_.resample_interval == 0) {
      Rng resample_rng = make_rng(cfg_.seed, {3, t});
      resample_low_variance(ps_, resample_rng);
      log.resampled = true;
    }
    const double sigma_prev = hyps_.sigma;
    hyps_ = cluster_hypotheses(ps_, eps(), min_pts());
    if (cfg_.adapt) adapt_count(ps_, sigma_prev, hyps_.sigma, cfg_);
  } catch (const ParticleDepletion& e) {
    throw ParticleDepletion(std::string(e.what()) + " at step " + std::to_string(t));
  }

  log.n = ps_.size();
  log.hypotheses = hyps_.hypotheses.size();
  log.sigma_h = hyps_.sigma;
  if (gt) {
    log.error = particle_errors(ps_, *gt);
    log.cluster_error = min_cluster_errors(hyps_, *gt);
  }
  log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return log;
}

}  // namespace touchloc
