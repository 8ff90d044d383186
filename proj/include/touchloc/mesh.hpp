#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace touchloc {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh in meters with unit per-face normals.
struct TriMesh {
  std::string name;
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Face> faces;
  std::vector<Eigen::Vector3d> normals;
  Eigen::AlignedBox3d bounds;
  double diagonal = 0.0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
  double face_area(std::size_t f) const;
  double surface_area() const;
  double longest_edge() const;
};

/// Validates indices, drops zero-area faces and computes normals, bounds and
/// diagonal. Throws MeshError on an empty result or an invalid index.
TriMesh make_mesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces,
                  std::string name = {});

/// Merges vertices closer than `tolerance` (meters) and rebuilds the mesh.
TriMesh weld_vertices(const TriMesh& mesh, double tolerance = 1e-9);

/// Uniform 1-to-4 midpoint subdivision, repeated until the longest edge is at
/// most `max_edge`. Shared edges are split once, so connectivity is kept.
TriMesh subdivide(const TriMesh& mesh, double max_edge);

/// Loads OBJ, STL (ASCII or binary) or ASCII PLY, chosen by extension.
TriMesh load_mesh(const std::filesystem::path& path);

void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

/// Generated desk-scale test objects. `resolution` is the grid spacing of
/// the tessellation in meters.
namespace primitives {

TriMesh box(const Eigen::Vector3d& size, double resolution);
TriMesh plane(double size_x, double size_y, double resolution);
TriMesh sphere(double radius, double resolution);
TriMesh cylinder(double radius, double height, double resolution);
/// L-shaped extrusion: legs of outer length `leg_a` (along x) and `leg_b`
/// (along y), wall `thickness`, extruded by `width` along z.
TriMesh l_bracket(double leg_a, double leg_b, double thickness, double width,
                  double resolution);

/// Named catalogue: "box", "cube", "cylinder", "sphere", "l_bracket", "plane".
TriMesh builtin(const std::string& name);
std::vector<std::string> builtin_names();

}  // namespace primitives

/// Resolves a mesh source string: "builtin:<name>" or a file path. Loaded
/// files are subdivided until no edge exceeds `max_edge` (0 keeps them as is).
TriMesh load_mesh_source(const std::string& source, double max_edge = 2e-3);

}  // namespace touchloc
