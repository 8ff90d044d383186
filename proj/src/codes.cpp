#include "touchloc/codes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

namespace touchloc {
namespace {

int voxel(double v, double lo, double size, int n) {
  const int i = static_cast<int>(std::floor((v - lo) / size));
  return std::clamp(i, 0, n - 1);
}

// In-place triangular blur along one axis of an nx*ny*nz grid (z fastest).
void blur_axis(std::vector<double>& g, int nx, int ny, int nz, int axis, int width) {
  const int n[3] = {nx, ny, nz};
  const int stride[3] = {ny * nz, nz, 1};
  std::vector<double> kernel(2 * width + 1);
  for (int k = -width; k <= width; ++k)
    kernel[k + width] = 1.0 - static_cast<double>(std::abs(k)) / (width + 1);

  std::vector<double> out(g.size(), 0.0);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) {
        const int pos[3] = {x, y, z};
        const int base = x * stride[0] + y * stride[1] + z * stride[2];
        double acc = 0.0;
        for (int k = -width; k <= width; ++k) {
          const int q = pos[axis] + k;
          if (q < 0 || q >= n[axis]) continue;
          acc += kernel[k + width] * g[base + k * stride[axis]];
        }
        out[base] = acc;
      }
  g.swap(out);
}

}  // namespace

void CodeConfig::validate() const {
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("code grid dims must be positive");
  if (!(half_x > 0.0 && half_y > 0.0 && depth > 0.0))
    throw std::invalid_argument("code volume must be positive");
  if (smoothing < 0) throw std::invalid_argument("smoothing width must be non-negative");
}

std::optional<TactileCode> encode(const PointCloud& cloud, const CodeConfig& cfg) {
  if (cloud.empty()) return std::nullopt;
  const double sx = 2.0 * cfg.half_x / cfg.nx;
  const double sy = 2.0 * cfg.half_y / cfg.ny;
  const double sz = cfg.depth / cfg.nz;
  std::vector<double> grid(cfg.dim(), 0.0);
  for (const auto& p : cloud) {
    const int ix = voxel(p.x(), -cfg.half_x, sx, cfg.nx);
    const int iy = voxel(p.y(), -cfg.half_y, sy, cfg.ny);
    const int iz = voxel(p.z(), 0.0, sz, cfg.nz);
    grid[(static_cast<std::size_t>(ix) * cfg.ny + iy) * cfg.nz + iz] += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(cloud.size());
  for (double& v : grid) v *= inv;
  if (cfg.smoothing > 0)
    for (int axis = 0; axis < 3; ++axis) blur_axis(grid, cfg.nx, cfg.ny, cfg.nz, axis, cfg.smoothing);

  TactileCode code(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) code[static_cast<Eigen::Index>(i)] = static_cast<float>(grid[i]);
  return code;
}

TactileCode random_code(std::size_t dim, Rng& rng) {
  TactileCode code(static_cast<Eigen::Index>(dim));
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index i = 0; i < code.size(); ++i) code[i] = static_cast<float>(n(rng));
  return code;
}

double code_similarity(const TactileCode& a, const TactileCode& b) {
  if (a.size() != b.size()) throw std::invalid_argument("code length mismatch");
  const double na = a.cast<double>().norm();
  const double nb = b.cast<double>().norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("zero tactile code");
  const double c = a.cast<double>().dot(b.cast<double>()) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

std::string crc32_hex(const void* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* bytes = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, bytes, chunk);
    bytes += chunk;
    size -= chunk;
  }
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

namespace {

std::vector<char> to_little_endian(const CodeMatrix& codes) {
  std::vector<char> bytes(static_cast<std::size_t>(codes.size()) * 4);
  for (Eigen::Index i = 0; i < codes.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(codes.data()[i]);
    for (int k = 0; k < 4; ++k) bytes[static_cast<std::size_t>(i) * 4 + k] = static_cast<char>((u >> (8 * k)) & 0xff);
  }
  return bytes;
}

std::filesystem::path sidecar(const std::filesystem::path& bin) {
  std::filesystem::path p = bin;
  return p.replace_extension(".json");
}

}  // namespace

void write_code_table(const CodeMatrix& codes, const std::filesystem::path& bin_path) {
  const std::vector<char> bytes = to_little_endian(codes);
  {
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw CodeTableError("cannot write '" + bin_path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::json meta = {{"M", codes.rows()},
                         {"D", codes.cols()},
                         {"checksum", crc32_hex(bytes.data(), bytes.size())}};
  std::ofstream out(sidecar(bin_path));
  if (!out) throw CodeTableError("cannot write code table sidecar");
  out << meta.dump(2) << '\n';
}

CodeMatrix read_code_table(const std::filesystem::path& bin_path) {
  std::ifstream side(sidecar(bin_path));
  if (!side) throw CodeTableError("missing code table sidecar for '" + bin_path.string() + "'");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw CodeTableError(std::string("bad code table sidecar: ") + e.what());
  }
  const auto rows = meta.at("M").get<Eigen::Index>();
  const auto cols = meta.at("D").get<Eigen::Index>();
  const auto checksum = meta.at("checksum").get<std::string>();

  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw CodeTableError("cannot open '" + bin_path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 4)
    throw CodeTableError(bin_path.string() + ": size does not match M x D");
  if (crc32_hex(bytes.data(), bytes.size()) != checksum)
    throw CodeTableError(bin_path.string() + ": checksum mismatch");

  CodeMatrix codes(rows, cols);
  for (Eigen::Index i = 0; i < codes.size(); ++i) {
    std::uint32_t u = 0;
    for (int k = 0; k < 4; ++k)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i) * 4 + k])) << (8 * k);
    codes.data()[i] = std::bit_cast<float>(u);
  }
  return codes;
}

}  // namespace touchloc
