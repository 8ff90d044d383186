#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchloc/codes.hpp"
#include "touchloc/pose.hpp"
#include "touchloc/sampling.hpp"
#include "touchloc/sensor.hpp"

namespace touchloc {

/// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

/// CSV rows `t,tx,ty,tz,qw,qx,qy,qz`.
void write_pose_csv(const std::filesystem::path& path, const std::vector<double>& times,
                    const std::vector<Pose>& poses);
void read_pose_csv(const std::filesystem::path& path, std::vector<double>& times,
                   std::vector<Pose>& poses);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

/// Version string baked in at configure time.
const char* git_describe();

void to_json(nlohmann::json& j, const SensorConfig& c);
void from_json(const nlohmann::json& j, SensorConfig& c);
void to_json(nlohmann::json& j, const CodeConfig& c);
void from_json(const nlohmann::json& j, CodeConfig& c);
void to_json(nlohmann::json& j, const ContactSamplingOptions& c);
void from_json(const nlohmann::json& j, ContactSamplingOptions& c);

}  // namespace touchloc
