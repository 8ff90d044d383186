#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace touchloc {

struct DbscanResult {
  std::vector<int> labels;  // cluster id per point, -1 for noise
  int clusters = 0;
};

/// Exact DBSCAN in R^3. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Cluster ids follow the lowest core
/// point index in each cluster; a border point joins the cluster of its
/// lowest-index core neighbour.
DbscanResult dbscan(const std::vector<Eigen::Vector3d>& points, double eps, std::size_t min_pts);

}  // namespace touchloc
