#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "touchloc/codebook.hpp"
#include "touchloc/dbscan.hpp"
#include "touchloc/filter.hpp"
#include "touchloc/harness.hpp"
#include "touchloc/io.hpp"
#include "touchloc/mesh.hpp"

namespace py = pybind11;
using namespace touchloc;

namespace {

Eigen::Quaterniond quat(const Eigen::Vector4d& wxyz) {
  return Eigen::Quaterniond(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
}

Eigen::Vector4d wxyz(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

py::array_t<double> heightmap_array(const Heightmap& hm) {
  py::array_t<double> out({hm.height, hm.width});
  std::copy(hm.depth.begin(), hm.depth.end(), out.mutable_data());
  return out;
}

Eigen::MatrixX3d cloud_matrix(const PointCloud& cloud) {
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(cloud.size()), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = cloud[i].transpose();
  return m;
}

PointCloud cloud_from(const Eigen::MatrixX3d& m) {
  PointCloud c(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) c[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tactile global localization core";
  m.attr("git_describe") = git_describe();

  py::register_exception<MeshError>(m, "MeshError", PyExc_ValueError);
  py::register_exception<ParticleDepletion>(m, "ParticleDepletion", PyExc_RuntimeError);
  py::register_exception<CodebookError>(m, "CodebookError", PyExc_RuntimeError);
  py::register_exception<CodeTableError>(m, "CodeTableError", PyExc_RuntimeError);
  py::register_exception<PathError>(m, "PathError", PyExc_RuntimeError);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector4d& q, const Eigen::Vector3d& t) { return Pose(quat(q), t); }),
           py::arg("quaternion_wxyz"), py::arg("translation"))
      .def_property_readonly("translation", [](const Pose& p) { return Eigen::Vector3d(p.translation()); })
      .def_property_readonly("quaternion", [](const Pose& p) { return wxyz(p.rotation()); })
      .def_property_readonly("rotation_matrix", &Pose::rotation_matrix)
      .def("inverse", &Pose::inverse)
      .def("__mul__", [](const Pose& a, const Pose& b) { return a * b; })
      .def("apply", [](const Pose& p, const Eigen::Vector3d& x) { return Eigen::Vector3d(p * x); })
      .def("__eq__", &Pose::operator==)
      .def("__repr__", [](const Pose& p) {
        const auto& t = p.translation();
        const auto& q = p.rotation();
        return "Pose(q=[" + format_double(q.w()) + ", " + format_double(q.x()) + ", " +
               format_double(q.y()) + ", " + format_double(q.z()) + "], t=[" + format_double(t.x()) +
               ", " + format_double(t.y()) + ", " + format_double(t.z()) + "])";
      });

  m.def("rot_log", [](const Eigen::Vector4d& q) { return rot_log(quat(q)); }, py::arg("quaternion_wxyz"));
  m.def("rot_exp", [](const Eigen::Vector3d& v) { return wxyz(rot_exp(v)); }, py::arg("rotvec"));
  m.def("relative", &relative, py::arg("from_pose"), py::arg("to_pose"));
  m.def("pose_key", [](const Pose& p, double alpha) {
    const PoseKey k = pose_key(p, alpha);
    return std::vector<double>(k.begin(), k.end());
  }, py::arg("pose"), py::arg("alpha") = 0.01);

  py::class_<TriMesh>(m, "TriMesh")
      .def_readonly("name", &TriMesh::name)
      .def_property_readonly("vertices", [](const TriMesh& t) {
        Eigen::MatrixX3d v(static_cast<Eigen::Index>(t.vertices.size()), 3);
        for (std::size_t i = 0; i < t.vertices.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = t.vertices[i].transpose();
        return v;
      })
      .def_property_readonly("faces", [](const TriMesh& t) {
        Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor> f(static_cast<Eigen::Index>(t.faces.size()), 3);
        for (std::size_t i = 0; i < t.faces.size(); ++i)
          for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(i), k) = t.faces[i][k];
        return f;
      })
      .def_readonly("diagonal", &TriMesh::diagonal)
      .def("surface_area", &TriMesh::surface_area);

  m.def("load_mesh", [](const std::string& src) { return load_mesh_source(src); }, py::arg("source"),
        "Load a mesh file or 'builtin:<name>'.");
  m.def("builtin_names", &primitives::builtin_names);

  py::class_<SurfaceIndex>(m, "SurfaceIndex")
      .def(py::init<TriMesh>(), py::arg("mesh"))
      .def_property_readonly("mesh", &SurfaceIndex::mesh, py::return_value_policy::reference_internal)
      .def("surface_distance", &SurfaceIndex::surface_distance, py::arg("point"));

  py::class_<SensorConfig>(m, "SensorConfig")
      .def(py::init<>())
      .def_readwrite("half_width", &SensorConfig::half_width)
      .def_readwrite("half_height", &SensorConfig::half_height)
      .def_readwrite("width", &SensorConfig::width)
      .def_readwrite("height", &SensorConfig::height)
      .def_readwrite("max_penetration", &SensorConfig::max_penetration)
      .def_readwrite("mask_threshold", &SensorConfig::mask_threshold)
      .def_readwrite("ray_length", &SensorConfig::ray_length)
      .def_readwrite("noise_sigma", &SensorConfig::noise_sigma);

  py::class_<CodeConfig>(m, "CodeConfig")
      .def(py::init<>())
      .def_readwrite("nx", &CodeConfig::nx)
      .def_readwrite("ny", &CodeConfig::ny)
      .def_readwrite("nz", &CodeConfig::nz)
      .def_readwrite("smoothing", &CodeConfig::smoothing)
      .def_property_readonly("dim", &CodeConfig::dim);

  m.def("render_touch", [](const SurfaceIndex& s, const Pose& p, const SensorConfig& c) {
    return heightmap_array(render_touch(s, p, c));
  }, py::arg("surface"), py::arg("pose"), py::arg("sensor") = SensorConfig{},
        "Penetration depth image (rows x cols), meters.");
  m.def("contact_cloud", [](const SurfaceIndex& s, const Pose& p, const SensorConfig& c) {
    return cloud_matrix(extract_contact(render_touch(s, p, c), c).cloud);
  }, py::arg("surface"), py::arg("pose"), py::arg("sensor") = SensorConfig{});
  m.def("encode", [](const Eigen::MatrixX3d& cloud, const CodeConfig& c) { return encode(cloud_from(cloud), c); },
        py::arg("cloud"), py::arg("config") = CodeConfig{}, "Tactile code, or None for an empty cloud.");
  m.def("code_similarity", &code_similarity, py::arg("a"), py::arg("b"));

  py::class_<CodebookParams>(m, "CodebookParams")
      .def(py::init<>())
      .def_readwrite("size", &CodebookParams::size)
      .def_readwrite("alpha", &CodebookParams::alpha)
      .def_readwrite("seed", &CodebookParams::seed)
      .def_readwrite("sensor", &CodebookParams::sensor)
      .def_readwrite("code", &CodebookParams::code);

  py::class_<Codebook>(m, "Codebook")
      .def_property_readonly("size", &Codebook::size)
      .def_property_readonly("dim", &Codebook::dim)
      .def_property_readonly("alpha", &Codebook::alpha)
      .def_property_readonly("codes", [](const Codebook& cb) { return Eigen::MatrixXf(cb.codes()); })
      .def("pose", &Codebook::pose, py::arg("index"))
      .def("nearest_index", py::overload_cast<const Pose&>(&Codebook::nearest_index, py::const_), py::arg("pose"))
      .def("query_top_k", [](const Codebook& cb, const TactileCode& code, std::size_t k) {
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& mt : cb.query_top_k(code, k)) out.emplace_back(mt.index, mt.similarity);
        return out;
      }, py::arg("code"), py::arg("k"), "[(index, similarity)] sorted by similarity.")
      .def_readwrite("mesh_source", &Codebook::mesh_source);

  m.def("build_codebook", [](const SurfaceIndex& s, const CodebookParams& p) {
    py::gil_scoped_release release;
    return build_codebook(s, p);
  }, py::arg("surface"), py::arg("params"));
  m.def("save_codebook", &save_codebook, py::arg("codebook"), py::arg("directory"));
  m.def("load_codebook", &load_codebook, py::arg("directory"));
  m.def("single_touch_error", [](const Codebook& cb, const SurfaceIndex& s, const Pose& q, std::size_t k,
                                 std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return single_touch_error(cb, s, q, k, rng).normalized;
  }, py::arg("codebook"), py::arg("surface"), py::arg("query"), py::arg("k") = 25, py::arg("seed") = 0);

  m.def("resample_low_variance", [](const std::vector<double>& weights, std::uint64_t seed) {
    ParticleSet ps;
    ps.poses.resize(weights.size());
    ps.weights = weights;
    ps.hints.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) ps.hints[i] = i;
    Rng rng = make_rng(seed);
    resample_low_variance(ps, rng);
    return ps.hints;
  }, py::arg("weights"), py::arg("seed") = 0, "Indices of the particles selected by systematic resampling.");

  m.def("dbscan", [](const Eigen::MatrixX3d& pts, double eps, std::size_t min_pts) {
    return dbscan(cloud_from(pts), eps, min_pts).labels;
  }, py::arg("points"), py::arg("eps"), py::arg("min_pts"));

  py::class_<FilterConfig>(m, "FilterConfig")
      .def(py::init<>())
      .def_readwrite("n0", &FilterConfig::n0)
      .def_readwrite("n_min", &FilterConfig::n_min)
      .def_readwrite("beta", &FilterConfig::beta)
      .def_readwrite("tau", &FilterConfig::tau)
      .def_readwrite("sigma_trans", &FilterConfig::sigma_trans)
      .def_readwrite("sigma_rot", &FilterConfig::sigma_rot)
      .def_readwrite("prune_distance", &FilterConfig::prune_distance)
      .def_readwrite("resample_interval", &FilterConfig::resample_interval)
      .def_readwrite("seed", &FilterConfig::seed);

  py::class_<TrajectoryParams>(m, "TrajectoryParams")
      .def(py::init<>())
      .def_readwrite("length", &TrajectoryParams::length)
      .def_readwrite("step", &TrajectoryParams::step)
      .def_readwrite("sigma_trans", &TrajectoryParams::sigma_trans)
      .def_readwrite("sigma_rot", &TrajectoryParams::sigma_rot)
      .def_readwrite("omega", &TrajectoryParams::omega);

  py::class_<Frame>(m, "Frame")
      .def_readonly("time", &Frame::time)
      .def_readonly("gt", &Frame::gt)
      .def_readonly("noisy", &Frame::noisy)
      .def_readonly("penetration", &Frame::penetration);

  py::class_<TrajectoryLog>(m, "TrajectoryLog")
      .def_readonly("object", &TrajectoryLog::object)
      .def_readonly("frames", &TrajectoryLog::frames)
      .def("__len__", [](const TrajectoryLog& l) { return l.frames.size(); });

  m.def("generate_dataset", &generate_dataset, py::arg("surface"), py::arg("params"), py::arg("seed"));

  m.def("run_localization", [](const TrajectoryLog& log, const SurfaceIndex& s, const Codebook& cb,
                               const FilterConfig& f, std::size_t trials, std::uint64_t seed) {
    RunSummary r;
    {
      py::gil_scoped_release release;
      r = run_localization(log, s, cb, f, trials, seed);
    }
    py::dict d;
    d["median_e_trans"] = r.e_trans.median;
    d["median_e_rot"] = r.e_rot.median;
    d["median_cluster_e_trans"] = r.cluster_e_trans.median;
    d["median_initial_e_trans"] = r.initial_e_trans.median;
    d["failed"] = r.failed;
    d["mean_contact_area"] = r.mean_contact_area;
    d["log_csv"] = step_log_csv(r, false);
    return d;
  }, py::arg("trajectory"), py::arg("surface"), py::arg("codebook"), py::arg("filter"),
        py::arg("trials") = 1, py::arg("seed") = 0);
}
