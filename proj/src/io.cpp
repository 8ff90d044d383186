#include "touchloc/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace touchloc {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r' || text.back() == '\t'))
    text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_pose_csv(const std::filesystem::path& path, const std::vector<double>& times,
                    const std::vector<Pose>& poses) {
  if (times.size() != poses.size()) throw std::invalid_argument("times and poses differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "t,tx,ty,tz,qw,qx,qy,qz\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& t = poses[i].translation();
    const auto& q = poses[i].rotation();
    out << format_double(times[i]) << ',' << format_double(t.x()) << ',' << format_double(t.y())
        << ',' << format_double(t.z()) << ',' << format_double(q.w()) << ','
        << format_double(q.x()) << ',' << format_double(q.y()) << ',' << format_double(q.z())
        << '\n';
  }
}

void read_pose_csv(const std::filesystem::path& path, std::vector<double>& times,
                   std::vector<Pose>& poses) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  times.clear();
  poses.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
    double v[8];
    for (int k = 0; k < 8; ++k) v[k] = parse_double(f[k]);
    times.push_back(v[0]);
    poses.emplace_back(Eigen::Quaterniond(v[4], v[5], v[6], v[7]), Eigen::Vector3d(v[1], v[2], v[3]));
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

nlohmann::json pose_to_json(const Pose& p) {
  const auto& t = p.translation();
  const auto& q = p.rotation();
  return {{"t", {t.x(), t.y(), t.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  const auto t = j.at("t").get<std::vector<double>>();
  const auto q = j.at("q").get<std::vector<double>>();
  if (t.size() != 3 || q.size() != 4) throw std::invalid_argument("pose json needs t[3] and q[4]");
  return Pose(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), Eigen::Vector3d(t[0], t[1], t[2]));
}

const char* git_describe() { return TOUCHLOC_GIT_DESCRIBE; }

namespace {

template <typename T>
void get_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const SensorConfig& c) {
  j = {{"half_width", c.half_width},   {"half_height", c.half_height},
       {"width", c.width},             {"height", c.height},
       {"max_penetration", c.max_penetration}, {"mask_threshold", c.mask_threshold},
       {"ray_length", c.ray_length},   {"noise_sigma", c.noise_sigma},
       {"projection", "orthographic"}};
}

void from_json(const nlohmann::json& j, SensorConfig& c) {
  get_opt(j, "half_width", c.half_width);
  get_opt(j, "half_height", c.half_height);
  get_opt(j, "width", c.width);
  get_opt(j, "height", c.height);
  get_opt(j, "max_penetration", c.max_penetration);
  get_opt(j, "mask_threshold", c.mask_threshold);
  get_opt(j, "ray_length", c.ray_length);
  get_opt(j, "noise_sigma", c.noise_sigma);
  if (j.contains("projection") && j.at("projection").get<std::string>() != "orthographic")
    throw std::invalid_argument("only orthographic projection is supported");
  c.validate();
}

void to_json(nlohmann::json& j, const CodeConfig& c) {
  j = {{"nx", c.nx},         {"ny", c.ny},         {"nz", c.nz},
       {"half_x", c.half_x}, {"half_y", c.half_y}, {"depth", c.depth},
       {"smoothing", c.smoothing}};
}

void from_json(const nlohmann::json& j, CodeConfig& c) {
  get_opt(j, "nx", c.nx);
  get_opt(j, "ny", c.ny);
  get_opt(j, "nz", c.nz);
  get_opt(j, "half_x", c.half_x);
  get_opt(j, "half_y", c.half_y);
  get_opt(j, "depth", c.depth);
  get_opt(j, "smoothing", c.smoothing);
  c.validate();
}

void to_json(nlohmann::json& j, const ContactSamplingOptions& c) {
  j = {{"edge_angle_deg", c.edge_angle_deg},
       {"edge_fraction", c.edge_fraction},
       {"tilt_sigma_deg", c.tilt_sigma_deg},
       {"tilt_clip_sigmas", c.tilt_clip_sigmas},
       {"penetration_min", c.penetration_min},
       {"penetration_max", c.penetration_max},
       {"no_contact_fraction", c.no_contact_fraction},
       {"no_contact_offset", c.no_contact_offset}};
}

void from_json(const nlohmann::json& j, ContactSamplingOptions& c) {
  get_opt(j, "edge_angle_deg", c.edge_angle_deg);
  get_opt(j, "edge_fraction", c.edge_fraction);
  get_opt(j, "tilt_sigma_deg", c.tilt_sigma_deg);
  get_opt(j, "tilt_clip_sigmas", c.tilt_clip_sigmas);
  get_opt(j, "penetration_min", c.penetration_min);
  get_opt(j, "penetration_max", c.penetration_max);
  get_opt(j, "no_contact_fraction", c.no_contact_fraction);
  get_opt(j, "no_contact_offset", c.no_contact_offset);
}

}  // namespace touchloc
