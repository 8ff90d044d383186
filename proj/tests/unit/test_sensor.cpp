#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "touchloc/mesh.hpp"
#include "touchloc/rng.hpp"
#include "touchloc/sensor.hpp"
#include "touchloc/surface.hpp"

using namespace touchloc;

namespace {

// Sensor pressed `depth` into the surface at `point` with outward normal `n`.
Pose pressed(const Eigen::Vector3d& point, const Eigen::Vector3d& n, double depth) {
  return Pose::from_axes(-n, Eigen::Vector3d::UnitX(), point - depth * n);
}

}  // namespace

TEST_CASE("flat contact fills the image at the pressed depth") {
  const SurfaceIndex plane(primitives::builtin("plane"));
  const SensorConfig cfg;
  const Heightmap hm = render_touch(plane, pressed(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 1e-3), cfg);
  CHECK(hm.width == 160);
  CHECK(hm.height == 120);
  for (double d : hm.depth) CHECK(d == doctest::Approx(1e-3).epsilon(1e-9));
  const Contact c = extract_contact(hm, cfg);
  CHECK(c.cloud.size() == 19200);
  CHECK(c.mask.count() == 19200);
  CHECK(contact_area(c.mask, cfg) == doctest::Approx(20e-3 * 15e-3));
  for (const auto& p : c.cloud) {
    CHECK(std::abs(p.x()) <= cfg.half_width);
    CHECK(std::abs(p.y()) <= cfg.half_height);
  }
}

TEST_CASE("lifted sensor sees nothing") {
  const SurfaceIndex plane(primitives::builtin("plane"));
  const SensorConfig cfg;
  const Heightmap hm = render_touch(plane, pressed(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), -5e-3), cfg);
  for (double d : hm.depth) CHECK(d == 0.0);
  CHECK(extract_contact(hm, cfg).cloud.empty());
}

TEST_CASE("depth saturates at the maximum penetration") {
  const SurfaceIndex plane(primitives::builtin("plane"));
  const SensorConfig cfg;
  const Heightmap hm = render_touch(plane, pressed(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 3e-3), cfg);
  for (double d : hm.depth) CHECK(d == doctest::Approx(cfg.max_penetration));
  const TriMesh box = primitives::builtin("box");
  const Eigen::Vector3d top(0.5 * (box.bounds.min().x() + box.bounds.max().x()),
                            0.5 * (box.bounds.min().y() + box.bounds.max().y()), box.bounds.max().z());
  const Heightmap deep = render_touch(SurfaceIndex(box), pressed(top, Eigen::Vector3d::UnitZ(), 5e-3), cfg);
  for (double d : deep.depth) CHECK(d == doctest::Approx(cfg.max_penetration));
}

TEST_CASE("sphere contact follows the spherical cap") {
  const TriMesh mesh = primitives::builtin("sphere");
  const SurfaceIndex sphere(mesh);
  const double r = 0.5 * (mesh.bounds.max().z() - mesh.bounds.min().z());
  const Eigen::Vector3d centre = 0.5 * (mesh.bounds.min() + mesh.bounds.max());
  const double d = 1.5e-3;
  const SensorConfig cfg;
  const Heightmap hm = render_touch(sphere, pressed(centre + Eigen::Vector3d(0, 0, r), Eigen::Vector3d::UnitZ(), d), cfg);
  int contact = 0, expected = 0;
  for (int row = 0; row < cfg.height; ++row)
    for (int col = 0; col < cfg.width; ++col) {
      const Eigen::Vector2d xy = cfg.pixel_center(col, row);
      const double sag = r - std::sqrt(r * r - xy.squaredNorm());
      const double want = std::max(0.0, d - sag);
      CHECK(std::abs(hm.at(col, row) - want) < 2e-5);
      contact += hm.at(col, row) > cfg.mask_threshold;
      expected += want > cfg.mask_threshold;
    }
  // Contact radius sqrt(2 r d) is about 10.6 mm: the patch is clipped by the gel.
  CHECK(std::abs(contact - expected) < expected / 50);
}

TEST_CASE("box edge splits the image into a contact half-plane") {
  const TriMesh mesh = primitives::builtin("box");
  const SurfaceIndex box(mesh);
  const SensorConfig cfg;
  const Eigen::Vector3d edge(mesh.bounds.max().x(), 0.5 * (mesh.bounds.min().y() + mesh.bounds.max().y()),
                             mesh.bounds.max().z());
  const Heightmap hm = render_touch(box, pressed(edge, Eigen::Vector3d::UnitZ(), 1e-3), cfg);
  for (int row = 0; row < cfg.height; ++row)
    for (int col = 0; col < cfg.width; ++col) {
      const double want = col < cfg.width / 2 ? 1e-3 : 0.0;
      CHECK(hm.at(col, row) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("PGM round trip keeps micrometre depths") {
  SensorConfig cfg;
  Heightmap hm(cfg.width, cfg.height);
  Rng rng = make_rng(5);
  for (double& d : hm.depth) d = std::round(uniform(rng, 0.0, 2e-3) * 1e6) * 1e-6;
  const auto path = std::filesystem::temp_directory_path() / "touchloc_test_hm.pgm";
  write_pgm(hm, path);
  const Heightmap back = read_pgm(path);
  CHECK(back.width == hm.width);
  CHECK(back.height == hm.height);
  for (std::size_t i = 0; i < hm.depth.size(); ++i) CHECK(back.depth[i] == doctest::Approx(hm.depth[i]).epsilon(1e-12));
}

TEST_CASE("depth noise stays in range and skips empty pixels") {
  const SensorConfig cfg;
  Heightmap hm(cfg.width, cfg.height);
  for (int col = 0; col < cfg.width / 2; ++col)
    for (int row = 0; row < cfg.height; ++row) hm.at(col, row) = 1e-3;
  Rng rng = make_rng(6);
  add_depth_noise(hm, 1e-3, rng, cfg);
  for (int row = 0; row < cfg.height; ++row)
    for (int col = 0; col < cfg.width; ++col) {
      const double d = hm.at(col, row);
      CHECK(d >= 0.0);
      CHECK(d <= cfg.max_penetration);
      if (col >= cfg.width / 2) CHECK(d == 0.0);
    }
}

TEST_CASE("sensor config validation") {
  SensorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.width = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
