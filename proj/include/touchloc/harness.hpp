#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchloc/codebook.hpp"
#include "touchloc/filter.hpp"
#include "touchloc/path.hpp"
#include "touchloc/surface.hpp"

namespace touchloc {

struct TrajectoryParams {
  double length = 0.5;            // path arc length, meters
  double step = 2.0e-3;           // spacing between frames, meters
  double sigma_trans = 0.5e-3;    // pose corruption per axis, meters
  double sigma_rot = 0.0174532925199432957;  // radians
  double omega = 1.0;             // penetration scale in (0, 1]
  double penetration_min = 0.5e-3;
  double penetration_max = 2.0e-3;
  double frame_period = 0.1;      // seconds between frames
  PathOptions path;

  void validate() const;
};

struct Frame {
  double time = 0.0;
  Pose gt;                  // sensor pose pressed into the surface
  Pose noisy;               // gt corrupted by pose noise
  double penetration = 0.0;
  std::string heightmap;    // optional cached PGM path
};

struct TrajectoryLog {
  std::string object;
  std::vector<Frame> frames;
};

/// Surface walk with per-frame penetration omega * U[pen_min, pen_max] and
/// pose noise gt * N(0, diag(sigma_trans, sigma_rot)).
TrajectoryLog generate_dataset(const SurfaceIndex& surface, const TrajectoryParams& params,
                               std::uint64_t seed);

void save_trajectory(const TrajectoryLog& log, const std::filesystem::path& path);
TrajectoryLog load_trajectory(const std::filesystem::path& path);

/// Writes one PGM per frame into `dir` and records the paths in the log.
void cache_heightmaps(TrajectoryLog& log, const SurfaceIndex& surface, const SensorConfig& sensor,
                      const std::filesystem::path& dir);

/// Per-frame codes rendered from gt poses; nullopt where there is no contact.
struct FrameObservations {
  std::vector<std::optional<TactileCode>> codes;
  std::vector<double> contact_area;  // square meters
};

FrameObservations observe(const TrajectoryLog& log, const SurfaceIndex& surface, const Codebook& cb,
                          std::uint64_t seed);

struct TrialResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::size_t failed_step = 0;
  std::string failure;
  PoseErrors initial;
  PoseErrors final_error;
  PoseErrors final_cluster;
  std::vector<StepLog> steps;
  std::vector<std::vector<Hypothesis>> hypotheses;  // per step, when requested
};

struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};

Quartiles quartiles(std::vector<double> values);

struct RunSummary {
  std::vector<TrialResult> trials;
  Quartiles e_trans, e_rot, cluster_e_trans, cluster_e_rot, initial_e_trans;
  std::size_t failed = 0;
  double mean_contact_area = 0.0;
};

struct RunOptions {
  bool keep_hypotheses = false;
};

/// Runs `trials` independent filters over the dataset. Depleted trials are
/// flagged and scored as (M_diag, 180 deg).
RunSummary run_localization(const TrajectoryLog& log, const SurfaceIndex& surface, const Codebook& cb,
                            const FilterConfig& filter, std::size_t trials, std::uint64_t seed,
                            const RunOptions& opts = {});

/// CSV of every step of every trial. `timing` adds a wall-clock column.
std::string step_log_csv(const RunSummary& run, bool timing);
nlohmann::json hypotheses_json(const RunSummary& run);

struct ExperimentConfig {
  std::string mesh = "builtin:box";
  CodebookParams codebook;
  FilterConfig filter;
  TrajectoryParams trajectory;
  std::size_t trials = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Overlays the keys present in `j` onto `c`.
void update_from_json(ExperimentConfig& c, const nlohmann::json& j);

enum class AblationKind { Beta, Omega };

struct AblationRow {
  double value = 0.0;
  double mean_contact_area = 0.0;
  Quartiles e_trans, e_rot;
  std::size_t failed = 0;
};

/// One run per value on a shared codebook and path; omega runs regenerate
/// penetrations from the same seed so rows are paired.
std::vector<AblationRow> ablation_suite(AblationKind kind, const std::vector<double>& values,
                                        const ExperimentConfig& base, const SurfaceIndex& surface,
                                        const Codebook& cb);
std::string ablation_csv(AblationKind kind, const std::vector<AblationRow>& rows);

}  // namespace touchloc
