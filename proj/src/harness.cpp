#include "touchloc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <sstream>

#include "touchloc/io.hpp"

namespace touchloc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

template <typename T>
void get_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void get_deg(const nlohmann::json& j, const char* key, double& radians) {
  if (j.contains(key)) radians = j.at(key).get<double>() * kDeg;
}

std::string pose_fields(const Pose& p) {
  const auto& t = p.translation();
  const auto& q = p.rotation();
  std::string s;
  for (double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) {
    s += ',';
    s += format_double(v);
  }
  return s;
}

Pose parse_pose(const std::vector<std::string>& f, std::size_t at) {
  double v[7];
  for (std::size_t k = 0; k < 7; ++k) v[k] = parse_double(f[at + k]);
  return Pose(Eigen::Quaterniond(v[3], v[4], v[5], v[6]), Eigen::Vector3d(v[0], v[1], v[2]));
}

}  // namespace

void TrajectoryParams::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("trajectory step must be positive");
  if (length < step) throw std::invalid_argument("trajectory length must be at least one step");
  if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must lie in (0, 1]");
  if (sigma_trans < 0.0 || sigma_rot < 0.0) throw std::invalid_argument("pose noise must be non-negative");
  if (!(penetration_min > 0.0 && penetration_min <= penetration_max))
    throw std::invalid_argument("need 0 < penetration_min <= penetration_max");
}

TrajectoryLog generate_dataset(const SurfaceIndex& surface, const TrajectoryParams& params,
                               std::uint64_t seed) {
  params.validate();
  Rng path_rng = make_rng(seed, {10});
  const std::vector<Pose> contact = geodesic_path(surface, path_rng, params.length, params.step, params.path);

  Rng pen_rng = make_rng(seed, {11});
  Rng noise_rng = make_rng(seed, {12});
  TrajectoryLog log;
  log.object = surface.mesh().name;
  log.frames.reserve(contact.size());
  for (std::size_t i = 0; i < contact.size(); ++i) {
    Frame f;
    f.time = static_cast<double>(i) * params.frame_period;
    f.penetration = params.omega * uniform(pen_rng, params.penetration_min, params.penetration_max);
    // Sensor z points into the object, so pressing in moves along +z.
    f.gt = contact[i] * Pose(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.0, 0.0, f.penetration));
    if (params.sigma_trans > 0.0 || params.sigma_rot > 0.0) {
      const Eigen::Vector3d nt = gaussian3(noise_rng, params.sigma_trans);
      const Eigen::Vector3d nr = gaussian3(noise_rng, params.sigma_rot);
      f.noisy = f.gt * Pose(rot_exp(nr), nt);
    } else {
      f.noisy = f.gt;
    }
    log.frames.push_back(f);
  }
  return log;
}

void save_trajectory(const TrajectoryLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "# object: " << log.object << '\n';
  out << "t,gt_tx,gt_ty,gt_tz,gt_qw,gt_qx,gt_qy,gt_qz,"
         "noisy_tx,noisy_ty,noisy_tz,noisy_qw,noisy_qx,noisy_qy,noisy_qz,penetration,heightmap\n";
  for (const Frame& f : log.frames)
    out << format_double(f.time) << pose_fields(f.gt) << pose_fields(f.noisy) << ','
        << format_double(f.penetration) << ',' << f.heightmap << '\n';
}

TrajectoryLog load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  TrajectoryLog log;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# object: ", 0) == 0) {
      log.object = line.substr(10);
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 17)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 17 fields");
    Frame fr;
    fr.time = parse_double(f[0]);
    fr.gt = parse_pose(f, 1);
    fr.noisy = parse_pose(f, 8);
    fr.penetration = parse_double(f[15]);
    fr.heightmap = f[16];
    if (!log.frames.empty() && fr.time < log.frames.back().time)
      throw std::runtime_error(path.string() + ": frames are not time-ordered");
    log.frames.push_back(fr);
  }
  if (log.frames.empty()) throw std::runtime_error(path.string() + ": no frames");
  return log;
}

void cache_heightmaps(TrajectoryLog& log, const SurfaceIndex& surface, const SensorConfig& sensor,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.pgm", i);
    write_pgm(render_touch(surface, log.frames[i].gt, sensor), dir / name);
    log.frames[i].heightmap = (dir / name).string();
  }
}

FrameObservations observe(const TrajectoryLog& log, const SurfaceIndex& surface, const Codebook& cb,
                          std::uint64_t seed) {
  const std::size_t n = log.frames.size();
  FrameObservations obs;
  obs.codes.resize(n);
  obs.contact_area.assign(n, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
    const auto i = static_cast<std::size_t>(s);
    Heightmap hm = render_touch(surface, log.frames[i].gt, cb.sensor);
    if (cb.sensor.noise_sigma > 0.0) {
      Rng rng = make_rng(seed, {20, i});
      add_depth_noise(hm, cb.sensor.noise_sigma, rng, cb.sensor);
    }
    const Contact c = extract_contact(hm, cb.sensor);
    obs.contact_area[i] = contact_area(c.mask, cb.sensor);
    obs.codes[i] = encode(c.cloud, cb.code_config);
  }
  return obs;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  std::sort(v.begin(), v.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

RunSummary run_localization(const TrajectoryLog& log, const SurfaceIndex& surface, const Codebook& cb,
                            const FilterConfig& filter, std::size_t trials, std::uint64_t seed,
                            const RunOptions& opts) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  if (log.frames.empty()) throw std::invalid_argument("empty trajectory");
  filter.validate();
  const FrameObservations obs = observe(log, surface, cb, seed);
  const double diag = surface.mesh().diagonal;
  const PoseErrors worst{diag, 180.0};

  RunSummary run;
  run.trials.resize(trials);
  std::vector<std::exception_ptr> errors(trials);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(trials); ++s) {
    const auto k = static_cast<std::size_t>(s);
    TrialResult& r = run.trials[k];
    try {
      FilterConfig cfg = filter;
      cfg.seed = derive_seed(seed, {30, k});
      r.seed = cfg.seed;
      ParticleFilter pf(cb, surface, cfg, log.frames.front().gt);
      r.initial = particle_errors(pf.particles(), log.frames.front().gt);
      try {
        for (std::size_t i = 0; i < log.frames.size(); ++i) {
          Measurement m;
          m.delta = i == 0 ? Pose::identity() : relative(log.frames[i - 1].noisy, log.frames[i].noisy);
          m.code = obs.codes[i];
          r.steps.push_back(pf.step(m, log.frames[i].gt));
          if (opts.keep_hypotheses) r.hypotheses.push_back(pf.hypotheses().hypotheses);
        }
        r.final_error = r.steps.back().error;
        r.final_cluster = r.steps.back().cluster_error;
      } catch (const ParticleDepletion& e) {
        r.failed = true;
        r.failed_step = pf.steps();
        r.failure = e.what();
        r.final_error = worst;
        r.final_cluster = worst;
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> et, er, ct, cr, it;
  for (const auto& r : run.trials) {
    run.failed += r.failed ? 1 : 0;
    et.push_back(r.final_error.trans);
    er.push_back(r.final_error.rot);
    ct.push_back(std::isnan(r.final_cluster.trans) ? worst.trans : r.final_cluster.trans);
    cr.push_back(std::isnan(r.final_cluster.rot) ? worst.rot : r.final_cluster.rot);
    it.push_back(r.initial.trans);
  }
  run.e_trans = quartiles(et);
  run.e_rot = quartiles(er);
  run.cluster_e_trans = quartiles(ct);
  run.cluster_e_rot = quartiles(cr);
  run.initial_e_trans = quartiles(it);
  double area = 0.0;
  for (double a : obs.contact_area) area += a;
  run.mean_contact_area = area / static_cast<double>(obs.contact_area.size());
  return run;
}

std::string step_log_csv(const RunSummary& run, bool timing) {
  std::ostringstream out;
  out << "trial,step,N_t,e_trans,e_rot,min_cluster_e_trans,min_cluster_e_rot,H,sigma_h,random_code";
  if (timing) out << ",wall_ms";
  out << '\n';
  for (std::size_t k = 0; k < run.trials.size(); ++k)
    for (const StepLog& s : run.trials[k].steps) {
      out << k << ',' << s.step << ',' << s.n << ',' << format_double(s.error.trans) << ','
          << format_double(s.error.rot) << ',' << format_double(s.cluster_error.trans) << ','
          << format_double(s.cluster_error.rot) << ',' << s.hypotheses << ','
          << format_double(s.sigma_h) << ',' << (s.random_code ? 1 : 0);
      if (timing) out << ',' << format_double(s.wall_ms);
      out << '\n';
    }
  return out.str();
}

nlohmann::json hypotheses_json(const RunSummary& run) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& r : run.trials) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& hs : r.hypotheses) {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& h : hs)
        list.push_back({{"pose", pose_to_json(h.mean)}, {"std", {h.std.x(), h.std.y(), h.std.z()}}, {"count", h.count}});
      steps.push_back(std::move(list));
    }
    trials.push_back(std::move(steps));
  }
  return trials;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (codebook.size < 1) throw std::invalid_argument("codebook size must be at least 1");
  if (!(codebook.alpha > 0.0)) throw std::invalid_argument("codebook alpha must be positive");
  filter.validate();
  trajectory.validate();
  codebook.sensor.validate();
  codebook.code.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  const auto& f = c.filter;
  const auto& t = c.trajectory;
  j = {
      {"mesh", c.mesh},
      {"trials", c.trials},
      {"seed", c.seed},
      {"codebook",
       {{"M", c.codebook.size},
        {"alpha", c.codebook.alpha},
        {"seed", c.codebook.seed},
        {"sensor", c.codebook.sensor},
        {"code", c.codebook.code},
        {"sampling", c.codebook.sampling}}},
      {"filter",
       {{"N0", f.n0},
        {"N_min", f.n_min},
        {"beta", f.beta},
        {"tau", f.tau},
        {"sigma_trans", f.sigma_trans},
        {"sigma_rot_deg", f.sigma_rot / kDeg},
        {"prune_distance", f.prune_distance},
        {"resample_interval", f.resample_interval},
        {"dbscan_eps", f.dbscan_eps},
        {"dbscan_min_pts", f.dbscan_min_pts},
        {"adapt", f.adapt}}},
      {"trajectory",
       {{"L", t.length},
        {"step", t.step},
        {"sigma_trans", t.sigma_trans},
        {"sigma_rot_deg", t.sigma_rot / kDeg},
        {"omega", t.omega},
        {"penetration_min", t.penetration_min},
        {"penetration_max", t.penetration_max},
        {"frame_period", t.frame_period},
        {"waypoints", t.path.waypoints},
        {"max_retries", t.path.max_retries}}},
  };
}

void update_from_json(ExperimentConfig& c, const nlohmann::json& j) {
  get_opt(j, "mesh", c.mesh);
  get_opt(j, "trials", c.trials);
  get_opt(j, "seed", c.seed);
  if (j.contains("codebook")) {
    const auto& b = j.at("codebook");
    get_opt(b, "M", c.codebook.size);
    get_opt(b, "alpha", c.codebook.alpha);
    get_opt(b, "seed", c.codebook.seed);
    if (b.contains("sensor")) {
      nlohmann::json merged = c.codebook.sensor;
      merged.update(b.at("sensor"));
      c.codebook.sensor = merged.get<SensorConfig>();
    }
    if (b.contains("code")) {
      nlohmann::json merged = c.codebook.code;
      merged.update(b.at("code"));
      c.codebook.code = merged.get<CodeConfig>();
    }
    if (b.contains("sampling")) from_json(b.at("sampling"), c.codebook.sampling);
  }
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    get_opt(f, "N0", c.filter.n0);
    get_opt(f, "N_min", c.filter.n_min);
    get_opt(f, "beta", c.filter.beta);
    get_opt(f, "tau", c.filter.tau);
    get_opt(f, "sigma_trans", c.filter.sigma_trans);
    get_deg(f, "sigma_rot_deg", c.filter.sigma_rot);
    get_opt(f, "prune_distance", c.filter.prune_distance);
    get_opt(f, "resample_interval", c.filter.resample_interval);
    get_opt(f, "dbscan_eps", c.filter.dbscan_eps);
    get_opt(f, "dbscan_min_pts", c.filter.dbscan_min_pts);
    get_opt(f, "adapt", c.filter.adapt);
  }
  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    get_opt(t, "L", c.trajectory.length);
    get_opt(t, "step", c.trajectory.step);
    get_opt(t, "sigma_trans", c.trajectory.sigma_trans);
    get_deg(t, "sigma_rot_deg", c.trajectory.sigma_rot);
    get_opt(t, "omega", c.trajectory.omega);
    get_opt(t, "penetration_min", c.trajectory.penetration_min);
    get_opt(t, "penetration_max", c.trajectory.penetration_max);
    get_opt(t, "frame_period", c.trajectory.frame_period);
    get_opt(t, "waypoints", c.trajectory.path.waypoints);
    get_opt(t, "max_retries", c.trajectory.path.max_retries);
  }
}

std::vector<AblationRow> ablation_suite(AblationKind kind, const std::vector<double>& values,
                                        const ExperimentConfig& base, const SurfaceIndex& surface,
                                        const Codebook& cb) {
  if (values.empty()) throw std::invalid_argument("ablation needs at least one value");
  base.validate();
  std::vector<AblationRow> rows;
  const TrajectoryLog shared = generate_dataset(surface, base.trajectory, base.seed);
  for (double v : values) {
    ExperimentConfig cfg = base;
    TrajectoryLog log;
    if (kind == AblationKind::Beta) {
      cfg.filter.beta = v;
      log = shared;
    } else {
      cfg.trajectory.omega = v;
      log = generate_dataset(surface, cfg.trajectory, cfg.seed);
    }
    const RunSummary run = run_localization(log, surface, cb, cfg.filter, cfg.trials, cfg.seed);
    AblationRow row;
    row.value = v;
    row.mean_contact_area = run.mean_contact_area;
    row.e_trans = run.e_trans;
    row.e_rot = run.e_rot;
    row.failed = run.failed;
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(AblationKind kind, const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << (kind == AblationKind::Beta ? "beta" : "omega")
      << ",mean_contact_area,median_e_trans,q1_e_trans,q3_e_trans,median_e_rot,failed\n";
  for (const auto& r : rows)
    out << format_double(r.value) << ',' << format_double(r.mean_contact_area) << ','
        << format_double(r.e_trans.median) << ',' << format_double(r.e_trans.q1) << ','
        << format_double(r.e_trans.q3) << ',' << format_double(r.e_rot.median) << ',' << r.failed << '\n';
  return out.str();
}

}  // namespace touchloc
