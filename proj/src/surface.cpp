#include "touchloc/surface.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace touchloc {
namespace {

KdTree<3>::Point to_point(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

SurfaceIndex::SurfaceIndex(TriMesh mesh)
    : SurfaceIndex(std::make_shared<const TriMesh>(std::move(mesh))) {}

SurfaceIndex::SurfaceIndex(std::shared_ptr<const TriMesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_ || mesh_->faces.empty()) throw MeshError("SurfaceIndex: empty mesh");
  std::vector<KdTree<3>::Point> pts;
  pts.reserve(mesh_->vertices.size());
  for (const auto& v : mesh_->vertices) pts.push_back(to_point(v));
  vertex_tree_ = KdTree<3>(pts);
  build_adjacency();

  std::vector<Eigen::AlignedBox3d> boxes(mesh_->faces.size());
  for (std::size_t f = 0; f < boxes.size(); ++f) {
    boxes[f].setEmpty();
    for (std::uint32_t v : mesh_->faces[f]) boxes[f].extend(mesh_->vertices[v]);
  }
  bvh_faces_.resize(boxes.size());
  std::iota(bvh_faces_.begin(), bvh_faces_.end(), 0u);
  bvh_.reserve(2 * boxes.size() / 4 + 2);
  build_bvh(0, static_cast<std::uint32_t>(boxes.size()), boxes);
}

double SurfaceIndex::surface_distance(const Eigen::Vector3d& point) const {
  return std::sqrt(vertex_tree_.nearest(to_point(point)).dist_sq);
}

std::size_t SurfaceIndex::nearest_vertex(const Eigen::Vector3d& point) const {
  return vertex_tree_.nearest(to_point(point)).index;
}

void SurfaceIndex::build_adjacency() {
  const TriMesh& m = *mesh_;
  adjacency_.assign(m.faces.size(), {-1, -1, -1});
  // Edge key -> (face, local edge) of every incident face.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::pair<std::uint32_t, int>>>
      incident;
  for (std::uint32_t f = 0; f < m.faces.size(); ++f)
    for (int k = 0; k < 3; ++k) {
      const auto key = std::minmax(m.faces[f][k], m.faces[f][(k + 1) % 3]);
      incident[{key.first, key.second}].emplace_back(f, k);
    }
  edges_.reserve(incident.size());
  for (const auto& [key, list] : incident) {
    MeshEdge e;
    e.v0 = key.first;
    e.v1 = key.second;
    e.f0 = list[0].first;
    // Only manifold edges get a neighbour; non-manifold fans act as borders.
    if (list.size() == 2) {
      e.f1 = list[1].first;
      adjacency_[list[0].first][list[0].second] = list[1].first;
      adjacency_[list[1].first][list[1].second] = list[0].first;
      const double c = std::clamp(m.normals[list[0].first].dot(m.normals[list[1].first]), -1.0, 1.0);
      e.dihedral = std::acos(c);
    }
    edges_.push_back(e);
  }
}

std::uint32_t SurfaceIndex::build_bvh(std::uint32_t begin, std::uint32_t end,
                                      const std::vector<Eigen::AlignedBox3d>& boxes) {
  const auto id = static_cast<std::uint32_t>(bvh_.size());
  bvh_.push_back({});
  Eigen::AlignedBox3d box;
  box.setEmpty();
  Eigen::AlignedBox3d centroids;
  centroids.setEmpty();
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(boxes[bvh_faces_[i]]);
    centroids.extend(boxes[bvh_faces_[i]].center());
  }
  bvh_[id].box = box;
  bvh_[id].begin = begin;
  bvh_[id].end = end;
  if (end - begin <= 4) return id;

  Eigen::Index axis;
  centroids.diagonal().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(bvh_faces_.begin() + begin, bvh_faces_.begin() + mid, bvh_faces_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return boxes[a].center()[axis] < boxes[b].center()[axis];
                   });
  const std::uint32_t left = build_bvh(begin, mid, boxes);
  const std::uint32_t right = build_bvh(mid, end, boxes);
  bvh_[id].left = left;
  bvh_[id].right = right;
  return id;
}

void SurfaceIndex::for_each_face_in(const Eigen::AlignedBox3d& box,
                                    const std::function<void(std::uint32_t)>& fn) const {
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const BvhNode& node = bvh_[stack.back()];
    stack.pop_back();
    if (!node.box.intersects(box)) continue;
    if (node.left == 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Face& f = mesh_->faces[bvh_faces_[i]];
        Eigen::AlignedBox3d fb(mesh_->vertices[f[0]]);
        fb.extend(mesh_->vertices[f[1]]);
        fb.extend(mesh_->vertices[f[2]]);
        if (fb.intersects(box)) fn(bvh_faces_[i]);
      }
    } else {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
}

}  // namespace touchloc
