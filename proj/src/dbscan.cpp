#include "touchloc/dbscan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace touchloc {
namespace {

using CellKey = std::array<std::int64_t, 3>;

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ULL;
    return static_cast<std::size_t>(h);
  }
};

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

DbscanResult dbscan(const std::vector<Eigen::Vector3d>& points, double eps, std::size_t min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan eps must be positive");
  const std::size_t n = points.size();
  DbscanResult out;
  out.labels.assign(n, -1);
  if (n == 0) return out;
  min_pts = std::max<std::size_t>(min_pts, 1);

  // Cells with diagonal eps: points sharing a cell are always neighbours.
  const double side = eps / std::sqrt(3.0);
  const double eps2 = eps * eps;
  std::vector<CellKey> key(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) key[i][d] = static_cast<std::int64_t>(std::floor(points[i][d] / side));

  std::unordered_map<CellKey, std::uint32_t, CellHash> cell_of;
  std::vector<std::vector<std::uint32_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = cell_of.try_emplace(key[i], static_cast<std::uint32_t>(cells.size()));
    if (inserted) cells.emplace_back();
    cells[it->second].push_back(static_cast<std::uint32_t>(i));
  }

  // Neighbouring cells within reach: offsets up to 2 since eps / side = sqrt(3).
  std::vector<std::vector<std::uint32_t>> near(cells.size());
  for (const auto& [k, c] : cell_of)
    for (int dx = -2; dx <= 2; ++dx)
      for (int dy = -2; dy <= 2; ++dy)
        for (int dz = -2; dz <= 2; ++dz) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const auto it = cell_of.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it != cell_of.end()) near[c].push_back(it->second);
        }
  for (auto& v : near) std::sort(v.begin(), v.end());

  std::vector<std::uint8_t> core(n, 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].size() >= min_pts) {
      for (std::uint32_t i : cells[c]) core[i] = 1;
      continue;
    }
    for (std::uint32_t i : cells[c]) {
      std::size_t count = cells[c].size();
      for (std::uint32_t d : near[c]) {
        for (std::uint32_t j : cells[d])
          if ((points[i] - points[j]).squaredNorm() <= eps2 && ++count >= min_pts) break;
        if (count >= min_pts) break;
      }
      core[i] = count >= min_pts;
    }
  }

  // Cells are merged when any pair of their core points is within eps.
  UnionFind uf(cells.size());
  std::vector<std::uint8_t> has_core(cells.size(), 0);
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::uint32_t i : cells[c]) has_core[c] |= core[i];
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!has_core[c]) continue;
    for (std::uint32_t d : near[c]) {
      if (d < c || !has_core[d] || uf.find(static_cast<std::uint32_t>(c)) == uf.find(d)) continue;
      bool linked = false;
      for (std::uint32_t i : cells[c]) {
        if (!core[i]) continue;
        for (std::uint32_t j : cells[d])
          if (core[j] && (points[i] - points[j]).squaredNorm() <= eps2) {
            linked = true;
            break;
          }
        if (linked) break;
      }
      if (linked) uf.unite(static_cast<std::uint32_t>(c), d);
    }
  }

  // Label core points, numbering clusters by their lowest core index.
  std::vector<int> root_label(cells.size(), -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const std::uint32_t r = uf.find(cell_of.at(key[i]));
    if (root_label[r] < 0) root_label[r] = out.clusters++;
    out.labels[i] = root_label[r];
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    const std::uint32_t c = cell_of.at(key[i]);
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (std::uint32_t j : cells[c])
      if (core[j] && j < best) best = j;
    for (std::uint32_t d : near[c])
      for (std::uint32_t j : cells[d])
        if (core[j] && j < best && (points[i] - points[j]).squaredNorm() <= eps2) best = j;
    if (best != std::numeric_limits<std::uint32_t>::max()) out.labels[i] = out.labels[best];
  }
  return out;
}

}  // namespace touchloc
