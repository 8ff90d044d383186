#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "touchloc/codes.hpp"
#include "touchloc/kdtree.hpp"
#include "touchloc/pose.hpp"
#include "touchloc/sampling.hpp"
#include "touchloc/sensor.hpp"
#include "touchloc/surface.hpp"

namespace touchloc {

struct CodebookParams {
  std::size_t size = 5000;   // M
  double alpha = 0.01;       // rotation scale of the pose key
  std::uint64_t seed = 0;
  SensorConfig sensor;
  CodeConfig code;
  ContactSamplingOptions sampling;  // no_contact_fraction is forced to 0
};

/// Dense table of (sensor pose, tactile code) pairs for one object, with a
/// KD-tree over [t, alpha * log(R)] for pose lookups.
class Codebook {
 public:
  struct Match {
    std::size_t index = 0;
    double similarity = 0.0;
  };

  Codebook() = default;
  Codebook(std::vector<Pose> poses, CodeMatrix codes, double alpha);

  std::size_t size() const { return poses_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(codes_.cols()); }
  double alpha() const { return alpha_; }
  const std::vector<Pose>& poses() const { return poses_; }
  const Pose& pose(std::size_t i) const { return poses_[i]; }
  const CodeMatrix& codes() const { return codes_; }
  TactileCode code(std::size_t i) const { return codes_.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Index of the stored pose nearest to `pose` in key space; ties go to the
  /// lowest index. `hint` is an optional starting guess for faster batches.
  std::size_t nearest_index(const Pose& pose) const;
  std::size_t nearest_index(const Pose& pose, std::size_t hint) const;

  /// Cosine similarity of `code` against every stored row.
  Eigen::VectorXd similarities(const TactileCode& code) const;

  /// Exact top-k by similarity, descending; equal scores keep index order.
  std::vector<Match> query_top_k(const TactileCode& code, std::size_t k) const;

  // Descriptive metadata carried through save/load.
  std::string object;
  std::string mesh_source;
  SensorConfig sensor;
  CodeConfig code_config;
  std::uint64_t seed = 0;

 private:
  std::vector<Pose> poses_;
  CodeMatrix codes_;
  Eigen::VectorXd norms_;
  double alpha_ = 0.01;
  KdTree<6> tree_;
};

/// Samples M contact poses on the surface, renders and encodes each. A pose
/// that yields no contact is redrawn from its own seeded stream.
Codebook build_codebook(const SurfaceIndex& surface, const CodebookParams& params);

/// Returns the code stored at the nearest pose.
std::pair<TactileCode, std::size_t> nearest_code(const Codebook& cb, const Pose& pose);

/// e = |dt| / diag + angle / 180 deg.
double combined_pose_error(const Pose& a, const Pose& b, double diagonal);

/// Expected minimum of k values drawn without replacement from `values`.
double expected_min_of_k(std::vector<double> values, std::size_t k);

struct SingleTouchResult {
  double error = 0.0;        // best of top-k, combined
  double baseline = 0.0;     // expected best of k random codebook poses
  double normalized = 0.0;   // error / baseline
};

/// Renders and encodes a touch at `query`, retrieves the top-k codebook
/// poses and scores the best one against the query, normalized by the
/// same score for k random codebook entries (estimated from up to 1000
/// seeded draws). Throws std::invalid_argument if the touch has no contact.
SingleTouchResult single_touch_error(const Codebook& cb, const SurfaceIndex& surface,
                                     const Pose& query, std::size_t k, Rng& rng);

class CodebookError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Directory with poses.csv, codes.bin (+ codes.json) and meta.json.
void save_codebook(const Codebook& cb, const std::filesystem::path& dir);
Codebook load_codebook(const std::filesystem::path& dir);

}  // namespace touchloc
