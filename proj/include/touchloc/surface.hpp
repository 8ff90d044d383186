#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "touchloc/kdtree.hpp"
#include "touchloc/mesh.hpp"

namespace touchloc {

/// Mesh edge shared by one or two faces.
struct MeshEdge {
  std::uint32_t v0 = 0, v1 = 0;
  std::uint32_t f0 = 0;
  std::int64_t f1 = -1;      // -1 on a boundary edge
  double dihedral = 0.0;     // angle between adjacent face normals, radians
};

/// Read-only acceleration structures over one mesh: a vertex KD-tree for
/// surface distance, face adjacency for path walking, an edge list for
/// feature detection and a triangle AABB tree for rendering.
class SurfaceIndex {
 public:
  explicit SurfaceIndex(TriMesh mesh);
  explicit SurfaceIndex(std::shared_ptr<const TriMesh> mesh);

  const TriMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriMesh> mesh_ptr() const { return mesh_; }

  /// Distance to the nearest mesh vertex. Upper-bounds the exact distance to
  /// the surface by at most the longest edge length.
  double surface_distance(const Eigen::Vector3d& point) const;
  std::size_t nearest_vertex(const Eigen::Vector3d& point) const;

  /// Face across edge k (vertices k, k+1) of face f, or -1 on a boundary.
  std::int64_t neighbor(std::size_t face, int edge) const { return adjacency_[face][edge]; }

  const std::vector<MeshEdge>& edges() const { return edges_; }

  /// Calls `fn(face)` for every face whose bounding box overlaps `box`.
  void for_each_face_in(const Eigen::AlignedBox3d& box,
                        const std::function<void(std::uint32_t)>& fn) const;

 private:
  struct BvhNode {
    Eigen::AlignedBox3d box;
    std::uint32_t begin = 0, end = 0;
    std::uint32_t left = 0, right = 0;  // left == 0 marks a leaf
  };

  void build_adjacency();
  std::uint32_t build_bvh(std::uint32_t begin, std::uint32_t end,
                          const std::vector<Eigen::AlignedBox3d>& boxes);

  std::shared_ptr<const TriMesh> mesh_;
  KdTree<3> vertex_tree_;
  std::vector<std::array<std::int64_t, 3>> adjacency_;
  std::vector<MeshEdge> edges_;
  std::vector<BvhNode> bvh_;
  std::vector<std::uint32_t> bvh_faces_;
};

}  // namespace touchloc
