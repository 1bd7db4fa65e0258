#include <doctest.h>

#include "cameo/correspondence.hpp"

#include "oracle_helpers.hpp"

using namespace cameo;

namespace {

// Planar pointmap at z = depth spanning [-1, 1]^2.
Pointmap plane_pointmap(int h, int w, double depth) {
  Pointmap pm;
  pm.h = h;
  pm.w = w;
  pm.values.resize(std::size_t(h) * w * 3);
  pm.valid.assign(std::size_t(h) * w, 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::size_t i = (std::size_t(r) * w + c) * 3;
      pm.values[i + 0] = -1.0 + 2.0 * (c + 0.5) / w;
      pm.values[i + 1] = -1.0 + 2.0 * (r + 0.5) / h;
      pm.values[i + 2] = depth;
    }
  return pm;
}

Scene occlusion_scene() {
  Scene sc;
  sc.name = "occl";
  sc.spheres.push_back({{0, 0, 0}, 0.3, 1.0});
  sc.boxes.push_back({{0.25, 0, 0.45}, {0.18, 0.3, 0.06}, 0.6});
  sc.cameras.push_back(make_lookat_camera({0, 0.1, 1.8}, {0, 0, 0}, {0, 1, 0},
                                          150, 150, 128, 128));
  sc.cameras.push_back(make_lookat_camera({1.2, 0.1, 1.4}, {0, 0, 0},
                                          {0, 1, 0}, 150, 150, 128, 128));
  return sc;
}

}  // namespace

TEST_CASE("token grid at full resolution is the identity") {
  Pointmap pm = plane_pointmap(8, 8, 1.0);
  TokenGrid g = token_grid(pm, 8, 8);
  for (std::size_t i = 0; i < pm.values.size(); ++i)
    CHECK(g.points[i] == pm.values[i]);
  for (auto v : g.valid) CHECK(v == 1);
}

TEST_CASE("planar pointmap stays planar under downsampling") {
  Pointmap pm = plane_pointmap(32, 32, 1.0);
  TokenGrid g = token_grid(pm, 8, 8);
  for (int i = 0; i < g.count(); ++i)
    CHECK(g.point(i).z == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sphere token points stay within a pixel footprint of the surface") {
  Scene sc;
  sc.spheres.push_back({{0, 0, 0}, 0.5, 1.0});
  sc.cameras.push_back(make_lookat_camera({0, 0, 2}, {0, 0, 0}, {0, 1, 0},
                                          140, 140, 128, 128));
  sc.cameras.push_back(make_lookat_camera({0.5, 0, 1.9}, {0, 0, 0}, {0, 1, 0},
                                          140, 140, 128, 128));
  Pointmap pm = render_pointmap(sc, 0, 128, 128);
  TokenGrid g = token_grid(pm, 32, 32);
  // Pixel footprint on the surface at distance ~1.5 with f=140*... roughly
  // 4 px/token: points interpolated across a smooth surface stay within one
  // token footprint of the sphere.
  double footprint = 1.5 / 140.0 * 4.0 * 2.0;
  int n_valid = 0;
  for (int i = 0; i < g.count(); ++i) {
    if (!g.valid[std::size_t(i)]) continue;
    ++n_valid;
    double dist_to_surface = std::abs(norm(g.point(i)) - 0.5);
    REQUIRE(dist_to_surface <= footprint);
  }
  REQUIRE(n_valid > 200);
}

TEST_CASE("nearest neighbor matches the exhaustive oracle") {
  Pointmap pa = plane_pointmap(6, 6, 0.0);
  Scene sc = occlusion_scene();
  Pointmap pb = render_pointmap(sc, 0, 24, 24);
  TokenGrid a = token_grid(pa, 6, 6);
  TokenGrid b = token_grid(pb, 12, 12);

  for (int q = 0; q < a.count(); ++q) {
    auto [idx, dist] = nearest_in_3d(a, b, q);
    // Independent double loop.
    int best = -1;
    double bestd = 1e300;
    for (int k = 0; k < b.count(); ++k) {
      if (!b.valid[std::size_t(k)]) continue;
      Vec3 diff = a.point(q) - b.point(k);
      double d2 = diff.x * diff.x + diff.y * diff.y + diff.z * diff.z;
      if (d2 < bestd) {
        bestd = d2;
        best = k;
      }
    }
    REQUIRE(idx == best);
    REQUIRE(dist == doctest::Approx(std::sqrt(bestd)).epsilon(1e-12));
  }
}

TEST_CASE("nearest neighbor trivial cases") {
  TokenGrid a;
  a.h = 1;
  a.w = 1;
  a.points = {1, 0, 0};
  a.valid = {1};
  TokenGrid b;
  b.h = 1;
  b.w = 2;
  b.points = {0, 0, 0, 10, 0, 0};
  b.valid = {1, 1};
  auto [idx, dist] = nearest_in_3d(a, b, 0);
  CHECK(idx == 0);
  CHECK(dist == doctest::Approx(1.0));

  Pointmap pm = plane_pointmap(4, 4, 2.0);
  TokenGrid g = token_grid(pm, 4, 4);
  for (int q = 0; q < g.count(); ++q) {
    auto [self, d0] = nearest_in_3d(g, g, q);
    CHECK(self == q);
    CHECK(d0 == 0.0);
  }

  TokenGrid empty;
  empty.h = 1;
  empty.w = 1;
  empty.points = {0, 0, 0};
  empty.valid = {0};
  CHECK_THROWS_AS(nearest_in_3d(a, empty, 0), std::invalid_argument);
}

TEST_CASE("self-pair correspondence is the identity with full mask") {
  Pointmap pm = plane_pointmap(8, 8, 1.0);
  TokenGrid g = token_grid(pm, 8, 8);
  TokenCorrespondence tc = build_correspondence(g, g, 1.5);
  for (int q = 0; q < tc.count(); ++q) {
    CHECK(tc.match[std::size_t(q)] == q);
    CHECK(tc.mask[std::size_t(q)] == 1);
  }
  auto onehot = tc.onehot();
  for (int q = 0; q < tc.count(); ++q) {
    int sum = 0;
    for (int j = 0; j < tc.count(); ++j)
      sum += onehot[std::size_t(q) * tc.count() + j];
    CHECK(sum == 1);
  }
}

TEST_CASE("infinite tau marks every valid token visible") {
  Scene sc = occlusion_scene();
  TokenGrid a = token_grid(render_pointmap(sc, 0, 64, 64), 16, 16);
  TokenGrid b = token_grid(render_pointmap(sc, 1, 64, 64), 16, 16);
  double inf = std::numeric_limits<double>::infinity();
  TokenCorrespondence tc = build_correspondence(a, b, inf);
  for (int q = 0; q < tc.count(); ++q) {
    bool expect = a.valid[std::size_t(q)] == 1 &&
                  tc.match[std::size_t(q)] >= 0 &&
                  b.valid[std::size_t(tc.match[std::size_t(q)])] == 1;
    CHECK(int(tc.mask[std::size_t(q)]) == (expect ? 1 : 0));
  }
}

TEST_CASE("mask coverage is monotone in tau") {
  Scene sc = occlusion_scene();
  TokenGrid a = token_grid(render_pointmap(sc, 0, 64, 64), 16, 16);
  TokenGrid b = token_grid(render_pointmap(sc, 1, 64, 64), 16, 16);
  double inf = std::numeric_limits<double>::infinity();
  TokenCorrespondence t15 = build_correspondence(a, b, 1.5);
  TokenCorrespondence t3 = build_correspondence(a, b, 3.0);
  TokenCorrespondence tinf = build_correspondence(a, b, inf);
  for (int q = 0; q < t15.count(); ++q) {
    REQUIRE(t15.mask[std::size_t(q)] <= t3.mask[std::size_t(q)]);
    REQUIRE(t3.mask[std::size_t(q)] <= tinf.mask[std::size_t(q)]);
  }
}

TEST_CASE("cycle mask screens out occluded tokens") {
  Scene sc = occlusion_scene();
  TokenGrid a = token_grid(render_pointmap(sc, 0, 128, 128), 32, 32);
  TokenGrid b = token_grid(render_pointmap(sc, 1, 128, 128), 32, 32);
  TokenCorrespondence tc = build_correspondence(a, b, 1.5);

  int visible_and_masked_in = 0, visible_total = 0;
  int occluded_and_passed = 0, occluded_total = 0;
  for (int q = 0; q < tc.count(); ++q) {
    if (!a.valid[std::size_t(q)]) continue;
    Vec3 p = a.point(q);
    bool vis = point_visible_from(sc, sc.cameras[1], p, 5e-3);
    if (vis) {
      ++visible_total;
      if (tc.mask[std::size_t(q)]) ++visible_and_masked_in;
    } else {
      ++occluded_total;
      if (tc.mask[std::size_t(q)]) ++occluded_and_passed;
    }
  }
  REQUIRE(visible_total > 100);
  REQUIRE(occluded_total > 20);
  // Cycle consistency keeps most mutually visible tokens and rejects most
  // occluded ones.
  CHECK(double(visible_and_masked_in) / visible_total >= 0.8);
  CHECK(double(occluded_and_passed) / occluded_total <= 0.25);
}

TEST_CASE("mutual pixel matches") {
  SUBCASE("identical maps self-pair everywhere") {
    Pointmap pm = plane_pointmap(5, 5, 1.0);
    auto pairs = mutual_nn_pixels(pm, pm);
    REQUIRE(pairs.size() == 25);
    for (auto [a, b] : pairs) CHECK(a == b);
  }
  SUBCASE("asymmetric neighbor is excluded") {
    // 1x3 maps; hand-checked 3x3 distance table. In map B the middle point
    // crowds A's first two points, so exactly one of them loses its mutual
    // partner.
    Pointmap pa;
    pa.h = 1;
    pa.w = 3;
    pa.values = {0, 0, 0, 1, 0, 0, 4, 0, 0};
    pa.valid = {1, 1, 1};
    Pointmap pb = pa;
    pb.values = {0.4, 0, 0, 0.6, 0, 0, 4.1, 0, 0};
    // Distances A->B: a0: 0.4/0.6/4.1 -> b0 ; a1: 0.6/0.4/3.1 -> b1 ;
    // a2: 3.6/3.4/0.1 -> b2. B->A: b0: 0.4/0.6/3.6 -> a0 ; b1: 0.6/0.4/3.4
    // -> a1 ; b2: 4.1/3.1/0.1 -> a2. All mutual here; shift b1 to break it.
    pb.values[3] = 0.45;  // b1 now nearest to a0 as well
    auto pairs = mutual_nn_pixels(pa, pb);
    // a0 -> b0 (0.4 vs 0.45): still b0; b0 -> a0; mutual.
    // a1 -> b1 (0.55 vs 0.6): b1; b1 -> a0 (0.45 < 0.55): not mutual.
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].first == 0);
    CHECK(pairs[0].second == 0);
    CHECK(pairs[1].first == 2);
    CHECK(pairs[1].second == 2);
  }
}

TEST_CASE("strict cycle threshold reproduces mutual pixel pairs") {
  Scene sc = occlusion_scene();
  Pointmap pa = render_pointmap(sc, 0, 24, 24);
  Pointmap pb = render_pointmap(sc, 1, 24, 24);
  auto pairs = mutual_nn_pixels(pa, pb);

  TokenGrid a = token_grid(pa, 24, 24);
  TokenGrid b = token_grid(pb, 24, 24);
  TokenCorrespondence tc = build_correspondence(a, b, 0.5);
  std::vector<std::pair<int, int>> from_cycle;
  for (int q = 0; q < tc.count(); ++q)
    if (tc.mask[std::size_t(q)])
      from_cycle.emplace_back(q, tc.match[std::size_t(q)]);
  // tau < 1 admits only zero cycle error, i.e. exact mutual matches.
  CHECK(from_cycle == pairs);
}

TEST_CASE("correspondence set covers all ordered pairs") {
  Scene sc = occlusion_scene();
  std::vector<TokenGrid> grids;
  for (int v = 0; v < 2; ++v)
    grids.push_back(token_grid(render_pointmap(sc, v, 48, 48), 12, 12));
  auto set2 = correspondence_set(grids, 1.5);
  REQUIRE(set2.size() == 2);
  CHECK(set2[0].view_i == 0);
  CHECK(set2[0].view_j == 1);
  CHECK(set2[1].view_i == 1);
  CHECK(set2[1].view_j == 0);

  // Same inputs give bit-identical outputs.
  auto again = correspondence_set(grids, 1.5);
  CHECK(again[0].match == set2[0].match);
  CHECK(again[0].mask == set2[0].mask);
  CHECK(again[1].match == set2[1].match);
  CHECK(again[1].mask == set2[1].mask);

  // Cycle property: where both directions are masked in, the round trip
  // stays within tau.
  const auto& fwd = set2[0];
  const auto& bwd = set2[1];
  for (int q = 0; q < fwd.count(); ++q) {
    if (!fwd.mask[std::size_t(q)]) continue;
    int m = fwd.match[std::size_t(q)];
    if (!bwd.mask[std::size_t(m)]) continue;
    int back = bwd.match[std::size_t(m)];
    REQUIRE(token_coord_dist(q, back, fwd.w) <= fwd.tau + 1e-12);
  }
}

TEST_CASE("four views yield twelve ordered pairs") {
  SceneSetSpec spec;
  spec.num_scenes = 1;
  spec.num_views = 4;
  Rng rng(2);
  Scene sc = generate_scene_set(spec, rng)[0];
  std::vector<TokenGrid> grids;
  for (int v = 0; v < 4; ++v)
    grids.push_back(token_grid(render_pointmap(sc, v, 32, 32), 8, 8));
  auto set4 = correspondence_set(grids, 1.5);
  CHECK(set4.size() == 12);
}

TEST_CASE("degenerate grids yield all-zero masks") {
  TokenGrid g;
  g.h = 2;
  g.w = 2;
  g.points.assign(12, std::numeric_limits<double>::quiet_NaN());
  g.valid.assign(4, 0);
  TokenCorrespondence tc = build_correspondence(g, g, 1.5);
  for (auto m : tc.mask) CHECK(m == 0);
  for (auto m : tc.match) CHECK(m == 0);
}
