#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "touchloc/codebook.hpp"
#include "touchloc/filter.hpp"
#include "touchloc/mesh.hpp"
#include "touchloc/rng.hpp"
#include "touchloc/surface.hpp"

using namespace touchloc;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct BoxFixture {
  SurfaceIndex surface{primitives::builtin("box")};
  Codebook cb;
  BoxFixture() {
    CodebookParams p;
    p.size = 600;
    p.seed = 51;
    cb = build_codebook(surface, p);
  }
};

const BoxFixture& box() {
  static const BoxFixture f;
  return f;
}

ParticleSet particles_at(const std::vector<Pose>& poses) {
  ParticleSet ps;
  ps.poses = poses;
  ps.weights.assign(poses.size(), 1.0 / static_cast<double>(poses.size()));
  ps.hints.assign(poses.size(), 0);
  return ps;
}

double sum(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

std::vector<std::size_t> copy_counts(const ParticleSet& out, const std::vector<Pose>& originals) {
  std::vector<std::size_t> c(originals.size(), 0);
  for (const Pose& p : out.poses)
    for (std::size_t i = 0; i < originals.size(); ++i)
      if (p == originals[i]) ++c[i];
  return c;
}

std::vector<Pose> distinct_poses(std::size_t n) {
  std::vector<Pose> v;
  for (std::size_t i = 0; i < n; ++i) v.emplace_back(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.01 * i, 0, 0));
  return v;
}

}  // namespace

TEST_CASE("filter config validation") {
  FilterConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_min = cfg.n0 + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("tempered softmax closed form") {
  std::vector<double> w{0.5, 0.5};
  apply_likelihood(w, {0.3, 0.3}, 0.05);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));

  w = {0.5, 0.5};
  apply_likelihood(w, {1.0, 0.0}, 0.05);
  const double e = std::exp(-20.0);
  CHECK(w[0] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(2.06e-9).epsilon(0.01));
}

TEST_CASE("softmax is shift invariant and keeps pruned particles at zero") {
  Rng rng = make_rng(52);
  std::vector<double> s(100), prior(100);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = uniform(rng, -1.0, 1.0);
    prior[i] = i % 7 == 0 ? 0.0 : uniform(rng);
  }
  std::vector<double> a = prior, b = prior;
  apply_likelihood(a, s, 0.05);
  std::vector<double> shifted = s;
  for (double& v : shifted) v += 0.37;
  apply_likelihood(b, shifted, 0.05);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    if (i % 7 == 0) CHECK(a[i] == 0.0);
  }
  CHECK(sum(a) == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<double> empty;
  CHECK_THROWS_AS(apply_likelihood(empty, {}, 0.05), std::invalid_argument);
  std::vector<double> dead{0.0, 0.0};
  CHECK_THROWS_AS(apply_likelihood(dead, {1.0, 0.0}, 0.05), ParticleDepletion);
}

TEST_CASE("measurement update weights sum to one") {
  const auto& f = box();
  Rng rng = make_rng(53);
  FilterConfig cfg;
  cfg.n0 = 2000;
  cfg.seed = 53;
  ParticleSet ps = init_particles(f.cb.pose(0), f.surface.mesh().diagonal, f.cb, cfg, rng);
  measurement_update(ps, f.cb.code(0), f.cb, 0.05);
  CHECK(sum(ps.weights) == doctest::Approx(1.0).epsilon(1e-9));
  ParticleSet none;
  CHECK_THROWS_AS(measurement_update(none, f.cb.code(0), f.cb, 0.05), std::invalid_argument);
}

TEST_CASE("prune zeroes only particles beyond the distance") {
  const auto& f = box();
  const TriMesh& m = f.surface.mesh();
  const Eigen::Vector3d top(0.5 * (m.bounds.min().x() + m.bounds.max().x()),
                            0.5 * (m.bounds.min().y() + m.bounds.max().y()), m.bounds.max().z());
  // Vertices lie on the 1 mm grid, so these distances are exact.
  ParticleSet ps = particles_at({Pose(Eigen::Quaterniond::Identity(), top + Eigen::Vector3d(0, 0, 3e-3)),
                                 Pose(Eigen::Quaterniond::Identity(), top + Eigen::Vector3d(0, 0, 1e-3)),
                                 Pose(Eigen::Quaterniond::Identity(), top)});
  ps.weights = {0.2, 0.3, 0.5};
  CHECK(prune_off_surface(ps, f.surface, 2e-3) == 1);
  CHECK(ps.weights[0] == 0.0);
  CHECK(ps.weights[1] == doctest::Approx(0.3 / 0.8));
  CHECK(ps.weights[2] == doctest::Approx(0.5 / 0.8));

  ParticleSet on = particles_at({Pose(Eigen::Quaterniond::Identity(), top)});
  CHECK(prune_off_surface(on, f.surface, 2e-3) == 0);
  CHECK(on.weights[0] == 1.0);

  // A particle exactly at the limit survives.
  const Pose edge_case(Eigen::Quaterniond::Identity(), top + Eigen::Vector3d(0, 0, 2e-3));
  ParticleSet at_limit = particles_at({edge_case});
  CHECK(prune_off_surface(at_limit, f.surface, f.surface.surface_distance(edge_case.translation())) == 0);

  ParticleSet off = particles_at({Pose(Eigen::Quaterniond::Identity(), top + Eigen::Vector3d(0, 0, 5e-3))});
  CHECK_THROWS_AS(prune_off_surface(off, f.surface, 2e-3), ParticleDepletion);
}

TEST_CASE("systematic resampling examples") {
  Rng rng = make_rng(54);
  const auto two = distinct_poses(2);
  for (int rep = 0; rep < 200; ++rep) {
    ParticleSet ps = particles_at({two[0], two[1], two[0], two[1]});
    ps.poses = {two[0], two[1], two[1], two[1]};
    ps.weights = {0.75, 0.25, 0.0, 0.0};
    resample_low_variance(ps, rng);
    CHECK(ps.size() == 4);
    CHECK(copy_counts(ps, two) == std::vector<std::size_t>{3, 1});
    for (double w : ps.weights) CHECK(w == 0.25);
  }

  const auto five = distinct_poses(5);
  ParticleSet point = particles_at(five);
  point.weights = {1.0, 0.0, 0.0, 0.0, 0.0};
  resample_low_variance(point, rng);
  CHECK(copy_counts(point, five) == std::vector<std::size_t>{5, 0, 0, 0, 0});

  for (int rep = 0; rep < 50; ++rep) {
    ParticleSet uni = particles_at(five);
    resample_low_variance(uni, rng);
    CHECK(copy_counts(uni, five) == std::vector<std::size_t>{1, 1, 1, 1, 1});
  }

  ParticleSet zero = particles_at(five);
  std::fill(zero.weights.begin(), zero.weights.end(), 0.0);
  CHECK_THROWS_AS(resample_low_variance(zero, rng), ParticleDepletion);
}

TEST_CASE("systematic resampling is unbiased") {
  const auto five = distinct_poses(5);
  const std::vector<double> w{0.05, 0.33, 0.12, 0.4, 0.1};
  Rng rng = make_rng(55);
  std::vector<double> total(5, 0.0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    ParticleSet ps = particles_at(five);
    ps.weights = w;
    resample_low_variance(ps, rng);
    const auto c = copy_counts(ps, five);
    for (std::size_t i = 0; i < 5; ++i) total[i] += static_cast<double>(c[i]);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    // Copies of i are floor(Nw) or ceil(Nw), so the variance is f(1-f).
    const double expect = 5.0 * w[i];
    const double frac = expect - std::floor(expect);
    const double se = std::sqrt(std::max(frac * (1.0 - frac), 1e-12) / trials);
    CHECK(std::abs(total[i] / trials - expect) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("particle count adaptation") {
  FilterConfig cfg;
  auto make = [](std::size_t n) {
    ParticleSet ps;
    for (std::size_t i = 0; i < n; ++i) {
      ps.poses.emplace_back(Eigen::Quaterniond::Identity(), Eigen::Vector3d(1e-6 * i, 0, 0));
      ps.weights.push_back(static_cast<double>(i + 1));
      ps.hints.push_back(0);
    }
    const double s = sum(ps.weights);
    for (double& w : ps.weights) w /= s;
    return ps;
  };
  ParticleSet a = make(50000);
  adapt_count(a, 2.0, 1.0, cfg);
  CHECK(a.size() == 25000);
  CHECK(sum(a.weights) == doctest::Approx(1.0).epsilon(1e-9));
  // The lightest particles were dropped.
  for (const Pose& p : a.poses) CHECK(p.translation().x() >= 1e-6 * 25000 - 1e-12);

  ParticleSet b = make(1500);
  adapt_count(b, 1.0, 0.1, cfg);
  CHECK(b.size() == 1000);

  ParticleSet c = make(1500);
  const ParticleSet before = c;
  adapt_count(c, 0.3, 0.3, cfg);
  CHECK(c.size() == before.size());
  CHECK(c.weights == before.weights);

  ParticleSet d = make(2000);
  adapt_count(d, 1.0, 1.5, cfg);
  CHECK(d.size() == 3000);
  CHECK(sum(d.weights) == doctest::Approx(1.0).epsilon(1e-9));
  // Growth splits the heaviest particle rather than inventing new poses.
  std::size_t heaviest_copies = 0;
  for (const Pose& p : d.poses) heaviest_copies += p.translation().x() == 1e-6 * 1999;
  CHECK(heaviest_copies >= 2);

  ParticleSet e = make(40000);
  adapt_count(e, 1.0, 10.0, cfg);
  CHECK(e.size() == cfg.n0);
}

TEST_CASE("initial particle spread follows beta") {
  const auto& f = box();
  const double diag = f.surface.mesh().diagonal;
  FilterConfig cfg;
  cfg.n0 = 500;
  cfg.n_min = 100;
  cfg.beta = 0.0;
  Rng rng = make_rng(56);
  const Pose prior = f.cb.pose(17) * Pose(rot_exp(Eigen::Vector3d(0.01, 0, 0)), Eigen::Vector3d(1e-4, 0, 0));
  const ParticleSet zero = init_particles(prior, diag, f.cb, cfg, rng);
  const std::size_t nearest = f.cb.nearest_index(prior);
  CHECK(zero.size() == 500);
  for (const Pose& p : zero.poses) CHECK(p == f.cb.pose(nearest));
  CHECK(sum(zero.weights) == doctest::Approx(1.0));

  SUBCASE("spread before snapping") {
    // Snapping hides the Gaussian, so check it on a dense codebook of the prior's neighbourhood.
    Rng prng = make_rng(57);
    std::vector<Pose> dense;
    for (int i = 0; i < 20000; ++i) dense.emplace_back(rot_exp(gaussian3(prng, 1.5)), gaussian3(prng, 0.06));
    const Codebook cb(dense, CodeMatrix::Ones(static_cast<Eigen::Index>(dense.size()), 2), 0.01);
    for (double beta : {1.0, 0.5}) {
      FilterConfig c;
      c.n0 = 4000;
      c.beta = beta;
      Rng r = make_rng(58);
      const ParticleSet ps = init_particles(Pose::identity(), 0.09, cb, c, r);
      double sx = 0.0;
      for (const Pose& p : ps.poses) sx += p.translation().squaredNorm();
      const double sigma_t = std::sqrt(sx / (3.0 * static_cast<double>(ps.size())));
      CHECK(sigma_t == doctest::Approx(beta * 0.09 / 3.0).epsilon(0.15));
    }
  }
}

TEST_CASE("motion update") {
  const auto poses = distinct_poses(3);
  Rng rng = make_rng(59);
  ParticleSet ps = particles_at(poses);
  motion_update(ps, Pose::identity(), 0.0, 0.0, rng);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ps.poses[i] == poses[i]);

  ParticleSet rotated = particles_at({Pose(rot_exp(Eigen::Vector3d(0, 0, std::numbers::pi / 2)), Eigen::Vector3d(1, 2, 3))});
  motion_update(rotated, Pose(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.01, 0, 0)), 0.0, 0.0, rng);
  // The particle's own x axis is world +y.
  CHECK((rotated.poses[0].translation() - Eigen::Vector3d(1, 2.01, 3)).norm() < 1e-12);

  const Pose x0(rot_exp(Eigen::Vector3d(0.3, -0.2, 0.5)), Eigen::Vector3d(0.1, 0.0, -0.05));
  const Pose delta(rot_exp(Eigen::Vector3d(0.0, 0.1, 0.0)), Eigen::Vector3d(0.004, 0.0, 0.001));
  const std::size_t n = 10000;
  ParticleSet copies = particles_at(std::vector<Pose>(n, x0));
  motion_update(copies, delta, 1e-3, 0.0, rng);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const Pose& p : copies.poses) mean += p.translation();
  mean /= static_cast<double>(n);
  const Eigen::Vector3d want = (x0 * delta).translation();
  const double se = 1e-3 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k] - want[k]) <= 3.0 * se);
}

TEST_CASE("quaternion averaging") {
  const Eigen::Quaterniond q = rot_exp(Eigen::Vector3d(0.4, -0.3, 1.1));
  Eigen::Quaterniond neg = q;
  neg.coeffs() = -q.coeffs();
  CHECK(rotation_angle(average_quaternion({q, neg}), q) < 1e-9);
  const Eigen::Quaterniond a = rot_exp(Eigen::Vector3d(0, 0, 0.2)), b = rot_exp(Eigen::Vector3d(0, 0, 0.4));
  CHECK(rotation_angle(average_quaternion({a, b}), rot_exp(Eigen::Vector3d(0, 0, 0.3))) < 1e-9);
}

TEST_CASE("clustering finds blobs and their centroids") {
  ParticleSet single = particles_at(std::vector<Pose>(50, Pose(rot_exp(Eigen::Vector3d(0.1, 0, 0)), Eigen::Vector3d(1, 2, 3))));
  const HypothesisSet one = cluster_hypotheses(single, 0.01, 5);
  REQUIRE(one.hypotheses.size() == 1);
  CHECK((one.hypotheses[0].mean.translation() - single.poses[0].translation()).norm() < 1e-12);
  CHECK(rotation_angle(one.hypotheses[0].mean.rotation(), single.poses[0].rotation()) < 1e-9);
  CHECK(one.hypotheses[0].std.norm() == doctest::Approx(0.0));
  CHECK(one.hypotheses[0].count == 50);

  Rng rng = make_rng(60);
  std::vector<Pose> poses;
  Eigen::Vector3d c0 = Eigen::Vector3d::Zero(), c1 = Eigen::Vector3d::Zero();
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d p = gaussian3(rng, 1e-3);
    poses.emplace_back(Eigen::Quaterniond::Identity(), p);
    c0 += p;
  }
  for (int i = 0; i < 300; ++i) {
    const Eigen::Vector3d p = Eigen::Vector3d(0.1, 0, 0) + gaussian3(rng, 1e-3);
    poses.emplace_back(Eigen::Quaterniond::Identity(), p);
    c1 += p;
  }
  const HypothesisSet two = cluster_hypotheses(particles_at(poses), 0.01, 5);
  REQUIRE(two.hypotheses.size() == 2);
  CHECK((two.hypotheses[0].mean.translation() - c0 / 200).norm() < 1e-12);
  CHECK((two.hypotheses[1].mean.translation() - c1 / 300).norm() < 1e-12);
  CHECK(two.hypotheses[0].count + two.hypotheses[1].count == 500);
  CHECK(two.sigma == doctest::Approx(1e-3).epsilon(0.15));
}

TEST_CASE("pose error metrics") {
  const Pose gt(rot_exp(Eigen::Vector3d(0.2, 0, 0)), Eigen::Vector3d(0.1, 0.1, 0.1));
  const PoseErrors zero = particle_errors(particles_at({gt, gt}), gt);
  CHECK(zero.trans == 0.0);
  CHECK(zero.rot == doctest::Approx(0.0));

  const Pose off(gt.rotation(), gt.translation() + Eigen::Vector3d(0.01, 0, 0));
  const PoseErrors one = particle_errors(particles_at({off}), gt);
  CHECK(one.trans == doctest::Approx(0.01));
  CHECK(one.rot == doctest::Approx(0.0));

  const Pose far(gt.rotation(), gt.translation() + Eigen::Vector3d(0, 0.02, 0));
  CHECK(particle_errors(particles_at({gt, far}), gt).trans == doctest::Approx(std::sqrt(4e-4 / 2)));

  const Pose turned(gt.rotation() * rot_exp(Eigen::Vector3d(0, 0, 30 * kDeg)), gt.translation());
  CHECK(particle_errors(particles_at({turned}), gt).rot == doctest::Approx(30.0));

  HypothesisSet hs;
  hs.hypotheses = {{far, {}, 1}, {off, {}, 1}};
  const PoseErrors mc = min_cluster_errors(hs, gt);
  CHECK(mc.trans == doctest::Approx(0.01));
  CHECK(mc.trans <= 0.02);
  CHECK(std::isnan(min_cluster_errors(HypothesisSet{}, gt).trans));

  // With one particle the cluster and particle errors coincide.
  const ParticleSet lone = particles_at({turned});
  const PoseErrors pe = particle_errors(lone, gt);
  const PoseErrors ce = min_cluster_errors(cluster_hypotheses(lone, 0.01, 1), gt);
  CHECK(ce.trans == doctest::Approx(pe.trans));
  CHECK(ce.rot == doctest::Approx(pe.rot));
}

TEST_CASE("filter steps") {
  const auto& f = box();
  FilterConfig cfg;
  cfg.n0 = 3000;
  cfg.n_min = 200;
  cfg.seed = 61;
  const Pose prior = f.cb.pose(5);

  SUBCASE("repeated identical measurements without motion shrink the hypothesis spread") {
    cfg.sigma_trans = 0.0;
    cfg.sigma_rot = 0.0;
    ParticleFilter pf(f.cb, f.surface, cfg, prior);
    double prev = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 10; ++t) {
      const StepLog log = pf.step({Pose::identity(), f.cb.code(5)}, prior);
      CHECK(log.sigma_h <= prev * (1.0 + 1e-9));
      CHECK(log.n >= cfg.n_min);
      CHECK(log.n <= cfg.n0);
      CHECK(sum(pf.particles().weights) == doctest::Approx(1.0).epsilon(1e-9));
      prev = log.sigma_h;
    }
  }

  SUBCASE("resampling interval") {
    cfg.resample_interval = 5;
    ParticleFilter pf(f.cb, f.surface, cfg, prior);
    for (std::size_t t = 1; t <= 12; ++t) {
      const StepLog log = pf.step({Pose::identity(), f.cb.code(5)});
      CHECK(log.step == t);
      CHECK(log.resampled == (t % 5 == 0));
    }
  }

  SUBCASE("no-contact frames use a random code") {
    ParticleFilter pf(f.cb, f.surface, cfg, prior);
    const StepLog log = pf.step({Pose::identity(), std::nullopt});
    CHECK(log.random_code);
    CHECK(sum(pf.particles().weights) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("identical seeds give identical runs") {
    ParticleFilter a(f.cb, f.surface, cfg, prior), b(f.cb, f.surface, cfg, prior);
    const Pose step(Eigen::Quaterniond::Identity(), Eigen::Vector3d(2e-3, 0, 0));
    for (int t = 0; t < 5; ++t) {
      const TactileCode code = f.cb.code(static_cast<std::size_t>(5 + t));
      const StepLog la = a.step({step, code}, prior), lb = b.step({step, code}, prior);
      CHECK(la.n == lb.n);
      CHECK(la.sigma_h == lb.sigma_h);
      CHECK(la.hypotheses == lb.hypotheses);
      CHECK(a.particles().weights == b.particles().weights);
      for (std::size_t i = 0; i < a.particles().size(); ++i) CHECK(a.particles().poses[i] == b.particles().poses[i]);
    }
  }

  SUBCASE("depletion names the step") {
    cfg.beta = 0.0;
    ParticleFilter pf(f.cb, f.surface, cfg, prior);
    pf.step({Pose::identity(), f.cb.code(5)});
    try {
      pf.step({Pose(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0, 0, -0.5)), f.cb.code(5)});
      FAIL("expected depletion");
    } catch (const ParticleDepletion& e) {
      CHECK(std::string(e.what()).find("at step 2") != std::string::npos);
    }
  }
}
