#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "touchloc/rng.hpp"
#include "touchloc/sensor.hpp"

namespace touchloc {

using TactileCode = Eigen::VectorXf;
using CodeMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Voxel grid over the sensor volume used by the occupancy descriptor.
struct CodeConfig {
  int nx = 8;
  int ny = 8;
  int nz = 4;
  double half_x = 10.0e-3;
  double half_y = 7.5e-3;
  double depth = 2.0e-3;
  int smoothing = 1;  // triangular kernel half-width in voxels; 0 disables

  std::size_t dim() const { return static_cast<std::size_t>(nx) * ny * nz; }
  void validate() const;
};

/// Turns a contact point cloud into a tactile code. Implementations must be
/// deterministic and safe to call concurrently.
class CodeProvider {
 public:
  virtual ~CodeProvider() = default;
  virtual std::size_t dim() const = 0;
  /// nullopt signals "no contact" (empty cloud).
  virtual std::optional<TactileCode> encode(const PointCloud& cloud) const = 0;
};

/// Per-voxel point fractions, blurred by a separable triangular kernel and
/// flattened with x slowest and z fastest.
std::optional<TactileCode> encode(const PointCloud& cloud, const CodeConfig& cfg);

class VoxelCodeProvider final : public CodeProvider {
 public:
  explicit VoxelCodeProvider(CodeConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }
  std::size_t dim() const override { return cfg_.dim(); }
  std::optional<TactileCode> encode(const PointCloud& cloud) const override {
    return touchloc::encode(cloud, cfg_);
  }
  const CodeConfig& config() const { return cfg_; }

 private:
  CodeConfig cfg_;
};

/// Stand-in code for frames without contact: i.i.d. standard normal entries.
TactileCode random_code(std::size_t dim, Rng& rng);

/// Cosine similarity. Throws std::invalid_argument on a zero vector or a
/// length mismatch.
double code_similarity(const TactileCode& a, const TactileCode& b);

class CodeTableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `<stem>.bin` (little-endian float32, row-major M x D) and
/// `<stem>.json` ({"M", "D", "checksum"}) where checksum is the CRC-32 of the
/// binary payload as 8 lowercase hex digits.
void write_code_table(const CodeMatrix& codes, const std::filesystem::path& bin_path);
CodeMatrix read_code_table(const std::filesystem::path& bin_path);

std::string crc32_hex(const void* data, std::size_t size);

}  // namespace touchloc
