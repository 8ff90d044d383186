#include "touchloc/codebook.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "touchloc/io.hpp"

namespace touchloc {

Codebook::Codebook(std::vector<Pose> poses, CodeMatrix codes, double alpha)
    : poses_(std::move(poses)), codes_(std::move(codes)), alpha_(alpha) {
  if (!(alpha_ > 0.0)) throw std::invalid_argument("codebook alpha must be positive");
  if (poses_.empty()) throw std::invalid_argument("codebook must not be empty");
  if (static_cast<std::size_t>(codes_.rows()) != poses_.size())
    throw std::invalid_argument("codebook pose and code counts differ");
  norms_ = codes_.cast<double>().rowwise().norm();
  std::vector<PoseKey> keys;
  keys.reserve(poses_.size());
  for (const Pose& p : poses_) keys.push_back(pose_key(p, alpha_));
  tree_ = KdTree<6>(keys);
}

std::size_t Codebook::nearest_index(const Pose& pose) const {
  return tree_.nearest(pose_key(pose, alpha_)).index;
}

std::size_t Codebook::nearest_index(const Pose& pose, std::size_t hint) const {
  return tree_.nearest(pose_key(pose, alpha_), hint).index;
}

Eigen::VectorXd Codebook::similarities(const TactileCode& code) const {
  if (static_cast<std::size_t>(code.size()) != dim())
    throw std::invalid_argument("code length does not match codebook");
  const double qn = code.cast<double>().norm();
  if (!(qn > 0.0)) throw std::invalid_argument("zero tactile code");
  Eigen::VectorXd dots = (codes_ * code).cast<double>();
  Eigen::VectorXd out(dots.size());
  for (Eigen::Index i = 0; i < dots.size(); ++i)
    out[i] = norms_[i] > 0.0 ? std::clamp(dots[i] / (norms_[i] * qn), -1.0, 1.0) : 0.0;
  return out;
}

std::vector<Codebook::Match> Codebook::query_top_k(const TactileCode& code, std::size_t k) const {
  if (k < 1 || k > size()) throw std::invalid_argument("top-k requires 1 <= k <= M");
  const Eigen::VectorXd sims = similarities(code);
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto before = [&](std::size_t a, std::size_t b) {
    return sims[static_cast<Eigen::Index>(a)] > sims[static_cast<Eigen::Index>(b)] ||
           (sims[static_cast<Eigen::Index>(a)] == sims[static_cast<Eigen::Index>(b)] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  std::vector<Match> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = {idx[i], sims[static_cast<Eigen::Index>(idx[i])]};
  return out;
}

Codebook build_codebook(const SurfaceIndex& surface, const CodebookParams& params) {
  if (params.size < 1) throw std::invalid_argument("codebook size must be at least 1");
  params.sensor.validate();
  params.code.validate();
  ContactSamplingOptions opts = params.sampling;
  opts.no_contact_fraction = 0.0;

  Rng rng = make_rng(params.seed, {0});
  std::vector<ContactSample> samples = sample_contact_poses(surface, params.size, rng, opts);
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  CodeMatrix codes(n, static_cast<Eigen::Index>(params.code.dim()));
  std::vector<std::uint8_t> ok(samples.size(), 0);

  const auto encode_into = [&](std::size_t i) {
    const Heightmap hm = render_touch(surface, samples[i].pose, params.sensor);
    const auto code = encode(extract_contact(hm, params.sensor).cloud, params.code);
    if (!code) return false;
    codes.row(static_cast<Eigen::Index>(i)) = code->transpose();
    return true;
  };

#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) ok[static_cast<std::size_t>(i)] = encode_into(static_cast<std::size_t>(i));

  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::uint64_t attempt = 1; !ok[i]; ++attempt) {
      if (attempt > 1000) throw std::runtime_error("codebook: cannot find a contact pose");
      Rng redraw = make_rng(params.seed, {1, i, attempt});
      samples[i] = sample_contact_poses(surface, 1, redraw, opts).front();
      ok[i] = encode_into(i);
    }
  }

  std::vector<Pose> poses;
  poses.reserve(samples.size());
  for (const auto& s : samples) poses.push_back(s.pose);
  Codebook cb(std::move(poses), std::move(codes), params.alpha);
  cb.object = surface.mesh().name;
  cb.sensor = params.sensor;
  cb.code_config = params.code;
  cb.seed = params.seed;
  return cb;
}

std::pair<TactileCode, std::size_t> nearest_code(const Codebook& cb, const Pose& pose) {
  const std::size_t i = cb.nearest_index(pose);
  return {cb.code(i), i};
}

double combined_pose_error(const Pose& a, const Pose& b, double diagonal) {
  return (a.translation() - b.translation()).norm() / diagonal +
         rotation_angle(a.rotation(), b.rotation()) / std::numbers::pi;
}

double expected_min_of_k(std::vector<double> values, std::size_t k) {
  const std::size_t n = values.size();
  if (k < 1 || k > n) throw std::invalid_argument("expected_min_of_k requires 1 <= k <= n");
  std::sort(values.begin(), values.end());
  // P(min is the i-th smallest) = C(n-i, k-1) / C(n, k), built by ratios.
  double p = static_cast<double>(k) / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 1; i + k <= n + 1; ++i) {
    sum += p * values[i - 1];
    p *= static_cast<double>(n - i - k + 1) / static_cast<double>(n - i);
  }
  return sum;
}

SingleTouchResult single_touch_error(const Codebook& cb, const SurfaceIndex& surface,
                                     const Pose& query, std::size_t k, Rng& rng) {
  const Heightmap hm = render_touch(surface, query, cb.sensor);
  const auto code = encode(extract_contact(hm, cb.sensor).cloud, cb.code_config);
  if (!code) throw std::invalid_argument("single-touch query has no contact");
  const double diag = surface.mesh().diagonal;

  SingleTouchResult r;
  r.error = std::numeric_limits<double>::infinity();
  for (const auto& m : cb.query_top_k(*code, k))
    r.error = std::min(r.error, combined_pose_error(cb.pose(m.index), query, diag));

  std::vector<std::size_t> pool(cb.size());
  std::iota(pool.begin(), pool.end(), 0);
  const std::size_t draws = std::min<std::size_t>(cb.size(), 1000);
  for (std::size_t i = 0; i < draws; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<double> random_errors(draws);
  for (std::size_t i = 0; i < draws; ++i)
    random_errors[i] = combined_pose_error(cb.pose(pool[i]), query, diag);
  r.baseline = expected_min_of_k(std::move(random_errors), std::min(k, draws));
  r.normalized = r.baseline > 0.0 ? r.error / r.baseline : 0.0;
  return r;
}

namespace {

constexpr const char* kPoses = "poses.csv";
constexpr const char* kCodes = "codes.bin";
constexpr const char* kMeta = "meta.json";

}  // namespace

void save_codebook(const Codebook& cb, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<double> index(cb.size());
  std::iota(index.begin(), index.end(), 0.0);
  write_pose_csv(dir / kPoses, index, cb.poses());
  write_code_table(cb.codes(), dir / kCodes);
  nlohmann::json meta = {{"object", cb.object},
                         {"mesh_source", cb.mesh_source},
                         {"M", cb.size()},
                         {"D", cb.dim()},
                         {"alpha", cb.alpha()},
                         {"sensor_cfg", cb.sensor},
                         {"code_cfg", cb.code_config},
                         {"seed", cb.seed}};
  write_text(dir / kMeta, meta.dump(2) + "\n");
}

namespace {

Codebook load_codebook_unchecked(const std::filesystem::path& dir) {
  const nlohmann::json meta = nlohmann::json::parse(read_text(dir / kMeta));
  std::vector<double> times;
  std::vector<Pose> poses;
  read_pose_csv(dir / kPoses, times, poses);
  CodeMatrix codes = read_code_table(dir / kCodes);
  const auto m = meta.at("M").get<std::size_t>();
  if (poses.size() != m || static_cast<std::size_t>(codes.rows()) != m)
    throw CodebookError(dir.string() + ": pose/code counts disagree with meta.json");
  Codebook cb(std::move(poses), std::move(codes), meta.at("alpha").get<double>());
  cb.object = meta.value("object", "");
  cb.mesh_source = meta.value("mesh_source", "");
  cb.sensor = meta.at("sensor_cfg").get<SensorConfig>();
  cb.code_config = meta.at("code_cfg").get<CodeConfig>();
  cb.seed = meta.value("seed", std::uint64_t{0});
  if (cb.dim() != cb.code_config.dim()) throw CodebookError(dir.string() + ": D does not match code_cfg");
  return cb;
}

}  // namespace

Codebook load_codebook(const std::filesystem::path& dir) {
  try {
    return load_codebook_unchecked(dir);
  } catch (const CodebookError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw CodebookError(dir.string() + ": bad meta.json: " + e.what());
  } catch (const std::exception& e) {
    throw CodebookError(dir.string() + ": " + e.what());
  }
}

}  // namespace touchloc
