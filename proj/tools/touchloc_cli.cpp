// touchloc command line: codebook building, trajectory generation, filter
// runs, single-touch evaluation and ablations.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchloc/codebook.hpp"
#include "touchloc/harness.hpp"
#include "touchloc/io.hpp"
#include "touchloc/mesh.hpp"

namespace fs = std::filesystem;
using namespace touchloc;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) update_from_json(cfg, nlohmann::json::parse(read_text(c.config)));
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

template <typename T>
void override(std::optional<T> flag, T& field) {
  if (flag) field = *flag;
}

fs::path manifest_path(const fs::path& out) {
  fs::path p = out;
  if (fs::is_directory(p)) return p / "manifest.json";
  p.replace_extension();
  return p.string() + ".manifest.json";
}

void write_manifest(const fs::path& out, const std::string& command, const ExperimentConfig& cfg,
                    nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json m = {{"command", command},
                      {"config", cfg},
                      {"seed", cfg.seed},
                      {"git_describe", git_describe()}};
  m.update(extra);
  write_text(manifest_path(out), m.dump(2) + "\n");
}

std::string mesh_for(const Codebook& cb, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (cb.mesh_source.empty()) throw std::runtime_error("codebook has no mesh source; pass --mesh");
  return cb.mesh_source;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile global localization on object meshes"};
  app.require_subcommand(1);

  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON experiment config; flags override it")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Random seed");
  };

  // build-codebook
  auto* build = app.add_subcommand("build-codebook", "Sample, render and encode a codebook");
  add_common(build);
  std::optional<std::string> b_mesh;
  std::optional<std::size_t> b_m;
  std::optional<double> b_alpha;
  std::string b_out;
  build->add_option("--mesh", b_mesh, "Mesh file or builtin:<name>");
  build->add_option("--M", b_m, "Number of codebook entries");
  build->add_option("--alpha", b_alpha, "Rotation scale of the pose key");
  build->add_option("--out", b_out, "Output directory")->required();

  // gen-traj
  auto* gen = app.add_subcommand("gen-traj", "Generate a sliding-touch trajectory");
  add_common(gen);
  std::optional<std::string> g_mesh;
  std::optional<double> g_len, g_step, g_omega;
  std::string g_out, g_cache;
  gen->add_option("--mesh", g_mesh, "Mesh file or builtin:<name>");
  gen->add_option("--L", g_len, "Path length in meters");
  gen->add_option("--step", g_step, "Frame spacing in meters");
  gen->add_option("--omega", g_omega, "Penetration scale in (0, 1]");
  gen->add_option("--out", g_out, "Output trajectory CSV")->required();
  gen->add_option("--cache", g_cache, "Directory for per-frame heightmap PGMs");

  // run-filter
  auto* run = app.add_subcommand("run-filter", "Run the particle filter over a trajectory");
  add_common(run);
  std::string r_cb, r_traj, r_out, r_mesh;
  std::optional<double> r_beta, r_tau;
  std::optional<std::size_t> r_trials, r_n0, r_interval;
  bool r_timing = false, r_hyps = false;
  run->add_option("--codebook", r_cb, "Codebook directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--traj", r_traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  run->add_option("--mesh", r_mesh, "Mesh override (defaults to the codebook's source)");
  run->add_option("--beta", r_beta, "Prior scale");
  run->add_option("--tau", r_tau, "Softmax temperature");
  run->add_option("--trials", r_trials, "Independent filter runs");
  run->add_option("--N0", r_n0, "Initial particle count");
  run->add_option("--resample-interval", r_interval, "Resample every k steps");
  run->add_option("--out", r_out, "Per-step CSV log")->required();
  run->add_flag("--timing", r_timing, "Add a wall-clock column to the log");
  run->add_flag("--hypotheses", r_hyps, "Dump per-step hypotheses as JSON next to the log");

  // eval-single-touch
  auto* single = app.add_subcommand("eval-single-touch", "Top-k retrieval error of single touches");
  add_common(single);
  std::string s_cb, s_mesh, s_out;
  std::size_t s_queries = 200, s_k = 25;
  single->add_option("--codebook", s_cb, "Codebook directory")->required()->check(CLI::ExistingDirectory);
  single->add_option("--mesh", s_mesh, "Mesh override (defaults to the codebook's source)");
  single->add_option("--queries", s_queries, "Number of random query touches");
  single->add_option("--k", s_k, "Retrieved candidates per query");
  single->add_option("--out", s_out, "Optional per-query CSV");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Sweep beta or omega");
  add_common(ablate);
  std::string a_kind, a_out, a_cb;
  std::vector<double> a_values;
  std::optional<std::string> a_mesh;
  std::optional<std::size_t> a_trials;
  ablate->add_option("--kind", a_kind, "beta or omega")->required()->check(CLI::IsMember({"beta", "omega"}));
  ablate->add_option("--values", a_values, "Values to sweep")->required()->expected(1, -1);
  ablate->add_option("--codebook", a_cb, "Existing codebook (built from the config otherwise)");
  ablate->add_option("--mesh", a_mesh, "Mesh file or builtin:<name>");
  ablate->add_option("--trials", a_trials, "Trials per value");
  ablate->add_option("--out", a_out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(common);

    if (*build) {
      override(b_mesh, cfg.mesh);
      override(b_m, cfg.codebook.size);
      override(b_alpha, cfg.codebook.alpha);
      if (common.seed) cfg.codebook.seed = *common.seed;
      cfg.validate();
      const SurfaceIndex surface(load_mesh_source(cfg.mesh));
      Codebook cb = build_codebook(surface, cfg.codebook);
      cb.mesh_source = cfg.mesh;
      save_codebook(cb, b_out);
      write_manifest(b_out, "build-codebook", cfg);
      std::cout << "codebook: " << cb.size() << " entries, D=" << cb.dim() << " -> " << b_out << "\n";
    } else if (*gen) {
      override(g_mesh, cfg.mesh);
      override(g_len, cfg.trajectory.length);
      override(g_step, cfg.trajectory.step);
      override(g_omega, cfg.trajectory.omega);
      cfg.validate();
      const SurfaceIndex surface(load_mesh_source(cfg.mesh));
      TrajectoryLog log = generate_dataset(surface, cfg.trajectory, cfg.seed);
      if (!g_cache.empty()) cache_heightmaps(log, surface, cfg.codebook.sensor, g_cache);
      save_trajectory(log, g_out);
      write_manifest(g_out, "gen-traj", cfg);
      std::cout << "trajectory: " << log.frames.size() << " frames -> " << g_out << "\n";
    } else if (*run) {
      override(r_beta, cfg.filter.beta);
      override(r_tau, cfg.filter.tau);
      override(r_trials, cfg.trials);
      override(r_n0, cfg.filter.n0);
      override(r_interval, cfg.filter.resample_interval);
      cfg.filter.n_min = std::min(cfg.filter.n_min, cfg.filter.n0);
      const Codebook cb = load_codebook(r_cb);
      cfg.mesh = mesh_for(cb, r_mesh);
      cfg.validate();
      const SurfaceIndex surface(load_mesh_source(cfg.mesh));
      const TrajectoryLog log = load_trajectory(r_traj);
      RunOptions opts;
      opts.keep_hypotheses = r_hyps;
      const RunSummary summary = run_localization(log, surface, cb, cfg.filter, cfg.trials, cfg.seed, opts);
      write_text(r_out, step_log_csv(summary, r_timing));
      if (r_hyps) {
        fs::path h = r_out;
        h.replace_extension(".hypotheses.json");
        write_text(h, hypotheses_json(summary).dump() + "\n");
      }
      nlohmann::json result = {{"median_e_trans", summary.e_trans.median},
                               {"median_e_rot", summary.e_rot.median},
                               {"median_cluster_e_trans", summary.cluster_e_trans.median},
                               {"median_initial_e_trans", summary.initial_e_trans.median},
                               {"failed_trials", summary.failed}};
      write_manifest(r_out, "run-filter", cfg,
                     {{"codebook", r_cb}, {"trajectory", r_traj}, {"result", result}});
      std::printf("trials %zu  failed %zu  median e_trans %.4f m  median e_rot %.2f deg\n", cfg.trials,
                  summary.failed, summary.e_trans.median, summary.e_rot.median);
    } else if (*single) {
      const Codebook cb = load_codebook(s_cb);
      const SurfaceIndex surface(load_mesh_source(mesh_for(cb, s_mesh)));
      Rng rng = make_rng(cfg.seed, {40});
      ContactSamplingOptions opts;
      opts.no_contact_fraction = 0.0;
      std::vector<double> normalized;
      std::string csv = "query,error,baseline,normalized\n";
      std::size_t q = 0;
      for (const auto& c : sample_contact_poses(surface, s_queries, rng, opts)) {
        SingleTouchResult r;
        try {
          r = single_touch_error(cb, surface, c.pose, s_k, rng);
        } catch (const std::invalid_argument&) {
          continue;  // grazing query without contact
        }
        normalized.push_back(r.normalized);
        csv += std::to_string(q++) + "," + format_double(r.error) + "," + format_double(r.baseline) +
               "," + format_double(r.normalized) + "\n";
      }
      if (!s_out.empty()) write_text(s_out, csv);
      const Quartiles qs = quartiles(normalized);
      std::printf("queries %zu  normalized error median %.3f  (q1 %.3f, q3 %.3f)\n", normalized.size(),
                  qs.median, qs.q1, qs.q3);
    } else if (*ablate) {
      override(a_mesh, cfg.mesh);
      override(a_trials, cfg.trials);
      Codebook cb;
      if (!a_cb.empty()) {
        cb = load_codebook(a_cb);
        if (!a_mesh) cfg.mesh = mesh_for(cb, "");
      }
      cfg.validate();
      const SurfaceIndex surface(load_mesh_source(cfg.mesh));
      if (a_cb.empty()) {
        cb = build_codebook(surface, cfg.codebook);
        cb.mesh_source = cfg.mesh;
      }
      const AblationKind kind = a_kind == "beta" ? AblationKind::Beta : AblationKind::Omega;
      const auto rows = ablation_suite(kind, a_values, cfg, surface, cb);
      write_text(a_out, ablation_csv(kind, rows));
      write_manifest(a_out, "ablate", cfg, {{"kind", a_kind}, {"values", a_values}});
      std::cout << ablation_csv(kind, rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
