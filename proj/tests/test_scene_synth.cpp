#include <doctest.h>

#include "cameo/scene.hpp"

#include "oracle_helpers.hpp"

using namespace cameo;

namespace {

Scene unit_sphere_scene() {
  Scene sc;
  sc.name = "unit";
  sc.spheres.push_back({{0, 0, 0}, 1.0, 0.8});
  // 129 px wide so the principal point sits exactly on a pixel center.
  sc.cameras.push_back(make_lookat_camera({0, 0, 3}, {0, 0, 0}, {0, 1, 0},
                                          120, 120, 129, 129));
  sc.cameras.push_back(make_lookat_camera({2.0, 0.5, 2.2}, {0, 0, 0},
                                          {0, 1, 0}, 120, 120, 129, 129));
  return sc;
}

}  // namespace

TEST_CASE("axial ray hits the unit sphere at (0,0,1)") {
  Scene sc = unit_sphere_scene();
  Pointmap pm = render_pointmap(sc, 0, 129, 129);
  REQUIRE(pm.valid[std::size_t(64) * 129 + 64] == 1);
  Vec3 p = pm.point(64, 64);
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.y == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.z == doctest::Approx(1.0).epsilon(1e-9));
  Vec3 cam_center = sc.cameras[0].center();
  CHECK(norm(p - cam_center) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("camera facing away sees nothing") {
  Scene sc = unit_sphere_scene();
  sc.cameras[0] = make_lookat_camera({0, 0, 3}, {0, 0, 6}, {0, 1, 0}, 120,
                                     120, 64, 64);
  Pointmap pm = render_pointmap(sc, 0, 32, 32);
  for (auto v : pm.valid) CHECK(v == 0);
}

TEST_CASE("rendered points reproject within half a pixel") {
  Scene sc = unit_sphere_scene();
  for (int view : {0, 1}) {
    Pointmap pm = render_pointmap(sc, view, 48, 48);
    const Camera& cam = sc.cameras[std::size_t(view)];
    int checked = 0;
    for (int r = 0; r < 48; ++r)
      for (int c = 0; c < 48; ++c) {
        if (!pm.valid[std::size_t(r) * 48 + c]) continue;
        double u, v;
        REQUIRE(cam.project(pm.point(r, c), u, v));
        // Render pixel (r, c) center in intrinsic image coordinates.
        double cu = (c + 0.5) * cam.width / 48.0;
        double cv = (r + 0.5) * cam.height / 48.0;
        double scale = 48.0 / cam.width;  // back to render pixels
        REQUIRE(std::abs((u - cu) * scale) <= 0.5);
        REQUIRE(std::abs((v - cv) * scale) <= 0.5);
        ++checked;
      }
    REQUIRE(checked > 100);
  }
}

TEST_CASE("box occluder renders with correct nearest hit") {
  Scene sc;
  sc.name = "boxed";
  sc.spheres.push_back({{0, 0, 0}, 0.5, 1.0});
  sc.boxes.push_back({{0, 0, 1.0}, {0.2, 0.2, 0.05}, 0.5});
  sc.cameras.push_back(make_lookat_camera({0, 0, 3}, {0, 0, 0}, {0, 1, 0},
                                          120, 120, 129, 129));
  sc.cameras.push_back(make_lookat_camera({0, 0, -3}, {0, 0, 0}, {0, 1, 0},
                                          120, 120, 129, 129));
  Pointmap pm = render_pointmap(sc, 0, 129, 129);
  // The center ray hits the box face at z = 1.05, not the sphere.
  Vec3 p = pm.point(64, 64);
  CHECK(p.z == doctest::Approx(1.05).epsilon(1e-9));
  // From behind, the center ray hits the sphere at z = -0.5.
  Pointmap pm2 = render_pointmap(sc, 1, 129, 129);
  Vec3 q = pm2.point(64, 64);
  CHECK(q.z == doctest::Approx(-0.5).epsilon(1e-9));

  // Visibility oracle agrees: the sphere apex (0,0,0.5) is hidden in view 0.
  CHECK_FALSE(point_visible_from(sc, sc.cameras[0], {0, 0, 0.5}));
  CHECK(point_visible_from(sc, sc.cameras[1], {0, 0, -0.5}));
}

TEST_CASE("plucker embedding at the principal point") {
  Camera cam;
  cam.fx = cam.fy = 100;
  cam.cx = cam.cy = 16.5;  // center of pixel (16,16) in a 33-wide image
  cam.width = cam.height = 33;
  cam.R = Mat3{};  // identity
  cam.t = {0, 0, 0};

  PluckerGrid g = plucker_embedding(cam, 33, 33);
  std::size_t i = (std::size_t(16) * 33 + 16) * 6;
  CHECK(g.values[i + 0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.values[i + 1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.values[i + 2] == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 3; k < 6; ++k)
    CHECK(g.values[i + k] == doctest::Approx(0.0).epsilon(1e-12));

  // Translated camera: moment = o x d at the principal point.
  cam.t = -(cam.R * Vec3{1, 0, 0});
  PluckerGrid g2 = plucker_embedding(cam, 33, 33);
  CHECK(g2.values[i + 2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g2.values[i + 3] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g2.values[i + 4] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(g2.values[i + 5] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("plucker invariants hold over a random camera grid") {
  Rng rng(13);
  Vec3 axis = normalized(Vec3{rng.normal(), rng.normal(), rng.normal()});
  Camera cam = make_lookat_camera({rng.uniform(-2, 2), rng.uniform(-2, 2), 3},
                                  {0.1, -0.2, 0}, axis, 90, 110, 40, 30);
  PluckerGrid g = plucker_embedding(cam, 30, 40);
  for (int i = 0; i < 30 * 40; ++i) {
    Vec3 d{g.values[std::size_t(i) * 6 + 0], g.values[std::size_t(i) * 6 + 1],
           g.values[std::size_t(i) * 6 + 2]};
    Vec3 m{g.values[std::size_t(i) * 6 + 3], g.values[std::size_t(i) * 6 + 4],
           g.values[std::size_t(i) * 6 + 5]};
    REQUIRE(std::abs(norm(d) - 1.0) <= 1e-6);
    REQUIRE(std::abs(dot(d, m)) <= 1e-6);
  }
}

TEST_CASE("relative rotation angle") {
  Scene sc = unit_sphere_scene();
  const Camera& a = sc.cameras[0];
  CHECK(relative_rotation_deg(a, a) == doctest::Approx(0.0));

  Camera b = a;
  b.R = Mat3::axis_angle({0, 1, 0}, M_PI / 2) * a.R;
  CHECK(relative_rotation_deg(a, b) == doctest::Approx(90.0).epsilon(1e-9));

  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 ax1 = normalized(Vec3{rng.normal(), rng.normal(), rng.normal()});
    Vec3 ax2 = normalized(Vec3{rng.normal(), rng.normal(), rng.normal()});
    Camera c1 = a, c2 = a;
    c1.R = Mat3::axis_angle(ax1, rng.uniform(0, M_PI));
    c2.R = Mat3::axis_angle(ax2, rng.uniform(0, M_PI));
    double lib = relative_rotation_deg(c1, c2);
    double q = oracle::quat_angle_deg(c1.R, c2.R);
    REQUIRE(std::abs(lib - q) <= 1e-6);
    REQUIRE(std::abs(relative_rotation_deg(c1, c2) -
                     relative_rotation_deg(c2, c1)) <= 1e-9);
    REQUIRE(lib >= 0.0);
    REQUIRE(lib <= 180.0);
  }
}

TEST_CASE("generated scene sets honor spread and seed") {
  SceneSetSpec spec;
  spec.num_scenes = 4;
  spec.num_views = 4;
  spec.spread_deg = 120;
  Rng rng(0);
  auto scenes = generate_scene_set(spec, rng);
  REQUIRE(scenes.size() == 4);
  for (const auto& sc : scenes) {
    REQUIRE(sc.cameras.size() == 4);
    REQUIRE(sc.spheres.size() + sc.boxes.size() >= 2);
    for (const auto& cam : sc.cameras) validate_camera(cam);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j)
        REQUIRE(relative_rotation_deg(sc.cameras[i], sc.cameras[j]) <=
                120.0 + 1e-9);
  }

  Rng rng2(0);
  auto scenes2 = generate_scene_set(spec, rng2);
  for (std::size_t i = 0; i < scenes.size(); ++i)
    CHECK(scene_to_json(scenes[i]) == scene_to_json(scenes2[i]));

  CHECK_THROWS_AS(
      [&] {
        SceneSetSpec bad = spec;
        bad.spread_deg = 0;
        Rng r(0);
        return generate_scene_set(bad, r);
      }(),
      std::invalid_argument);
}

TEST_CASE("pair angles cover all four rotation bins") {
  SceneSetSpec spec;
  spec.num_scenes = 100;
  spec.num_views = 4;
  spec.spread_deg = 120;
  Rng rng(0);
  auto scenes = generate_scene_set(spec, rng);
  int bins[4] = {0, 0, 0, 0};
  int total = 0;
  for (const auto& sc : scenes)
    for (std::size_t i = 0; i < sc.cameras.size(); ++i)
      for (std::size_t j = i + 1; j < sc.cameras.size(); ++j) {
        double th = relative_rotation_deg(sc.cameras[i], sc.cameras[j]);
        int b = std::min(3, int(th / 30.0));
        ++bins[b];
        ++total;
      }
  for (int b = 0; b < 4; ++b)
    CHECK(double(bins[b]) / total >= 0.05);
}

TEST_CASE("scene json round trips") {
  SceneSetSpec spec;
  spec.num_scenes = 1;
  Rng rng(5);
  Scene sc = generate_scene_set(spec, rng)[0];
  Scene back = scene_from_json(scene_to_json(sc));
  CHECK(scene_to_json(back) == scene_to_json(sc));
  CHECK_THROWS(scene_from_json("{\"name\": \"x\"}"));
}
