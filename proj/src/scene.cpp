#include "cameo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cameo/tensor.hpp"

namespace cameo {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kRayEps = 1e-9;

bool ray_sphere(const Vec3& o, const Vec3& d, const Sphere& s, double& t_out) {
  Vec3 oc = o - s.center;
  double b = dot(oc, d);
  double c = dot(oc, oc) - s.radius * s.radius;
  double disc = b * b - c;
  if (disc < 0) return false;
  double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= kRayEps) t = -b + sq;
  if (t <= kRayEps) return false;
  t_out = t;
  return true;
}

bool ray_box(const Vec3& o, const Vec3& d, const AxisBox& b, double& t_out,
             int& axis_out) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis_min = 0, axis_max = 0;
  const double od[3] = {o.x - b.center.x, o.y - b.center.y, o.z - b.center.z};
  const double dd[3] = {d.x, d.y, d.z};
  const double he[3] = {b.half_extents.x, b.half_extents.y, b.half_extents.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dd[a]) < 1e-15) {
      if (std::abs(od[a]) > he[a]) return false;
      continue;
    }
    double inv = 1.0 / dd[a];
    double t1 = (-he[a] - od[a]) * inv;
    double t2 = (he[a] - od[a]) * inv;
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > tmin) {
      tmin = t1;
      axis_min = a;
    }
    if (t2 < tmax) {
      tmax = t2;
      axis_max = a;
    }
    if (tmin > tmax) return false;
  }
  double t = tmin;
  int axis = axis_min;
  if (t <= kRayEps) {
    t = tmax;
    axis = axis_max;
  }
  if (t <= kRayEps) return false;
  t_out = t;
  axis_out = axis;
  return true;
}

}  // namespace

SurfaceHit trace_first_hit(const Scene& scene, const Vec3& origin,
                           const Vec3& dir) {
  SurfaceHit best;
  for (const auto& s : scene.spheres) {
    double t;
    if (ray_sphere(origin, dir, s, t) && t < best.t) {
      best.t = t;
      best.point = origin + dir * t;
      best.normal = normalized(best.point - s.center);
      best.albedo = s.albedo;
    }
  }
  for (const auto& b : scene.boxes) {
    double t;
    int axis;
    if (ray_box(origin, dir, b, t, axis) && t < best.t) {
      best.t = t;
      best.point = origin + dir * t;
      Vec3 local = best.point - b.center;
      Vec3 n{0, 0, 0};
      double sign = (axis == 0 ? local.x : axis == 1 ? local.y : local.z) >= 0
                        ? 1.0
                        : -1.0;
      if (axis == 0) n.x = sign;
      if (axis == 1) n.y = sign;
      if (axis == 2) n.z = sign;
      best.normal = n;
      best.albedo = b.albedo;
    }
  }
  return best;
}

bool point_visible_from(const Scene& scene, const Camera& cam,
                        const Vec3& point, double rel_tol) {
  Vec3 o = cam.center();
  Vec3 to = point - o;
  double dist = norm(to);
  if (dist < 1e-12) return false;
  SurfaceHit hit = trace_first_hit(scene, o, to / dist);
  if (!hit.hit()) return false;
  return std::abs(hit.t - dist) <= rel_tol * dist + 1e-6;
}

RenderedView render_view(const Scene& scene, int cam_index, int res_h,
                         int res_w) {
  if (cam_index < 0 || cam_index >= int(scene.cameras.size()))
    throw std::out_of_range("render_view: bad camera index");
  if (res_h < 1 || res_w < 1)
    throw std::invalid_argument("render_view: resolution must be >= 1");
  const Camera& cam = scene.cameras[std::size_t(cam_index)];
  Vec3 o = cam.center();
  // Fixed light direction keeps shading a pure function of the scene.
  Vec3 light = normalized(Vec3{0.4, -0.7, 0.6});

  RenderedView rv;
  rv.pointmap.h = res_h;
  rv.pointmap.w = res_w;
  rv.pointmap.values.assign(std::size_t(res_h) * res_w * 3, kNan);
  rv.pointmap.valid.assign(std::size_t(res_h) * res_w, 0);
  rv.depth.assign(std::size_t(res_h) * res_w, kNan);
  rv.normal.assign(std::size_t(res_h) * res_w * 3, kNan);
  rv.shading.assign(std::size_t(res_h) * res_w, 0.0);

#pragma omp parallel for schedule(static)
  for (int r = 0; r < res_h; ++r) {
    // Pixel grid of the render maps onto the camera's intrinsic image plane.
    double row = (r + 0.5) * cam.height / res_h - 0.5;
    for (int c = 0; c < res_w; ++c) {
      double col = (c + 0.5) * cam.width / res_w - 0.5;
      Vec3 dir = cam.pixel_ray_dir(row, col);
      SurfaceHit hit = trace_first_hit(scene, o, dir);
      if (!hit.hit()) continue;
      std::size_t i = std::size_t(r) * res_w + c;
      rv.pointmap.values[i * 3 + 0] = hit.point.x;
      rv.pointmap.values[i * 3 + 1] = hit.point.y;
      rv.pointmap.values[i * 3 + 2] = hit.point.z;
      rv.pointmap.valid[i] = 1;
      rv.depth[i] = hit.t;
      rv.normal[i * 3 + 0] = hit.normal.x;
      rv.normal[i * 3 + 1] = hit.normal.y;
      rv.normal[i * 3 + 2] = hit.normal.z;
      rv.shading[i] =
          hit.albedo * (0.2 + 0.8 * std::max(0.0, dot(hit.normal, light)));
    }
  }
  return rv;
}

Pointmap render_pointmap(const Scene& scene, int cam_index, int res_h,
                         int res_w) {
  return render_view(scene, cam_index, res_h, res_w).pointmap;
}

PluckerGrid plucker_embedding(const Camera& cam, int res_h, int res_w) {
  PluckerGrid g;
  g.h = res_h;
  g.w = res_w;
  g.values.assign(std::size_t(res_h) * res_w * 6, 0.0);
  Vec3 o = cam.center();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < res_h; ++r) {
    double row = (r + 0.5) * cam.height / res_h - 0.5;
    for (int c = 0; c < res_w; ++c) {
      double col = (c + 0.5) * cam.width / res_w - 0.5;
      Vec3 d = cam.pixel_ray_dir(row, col);
      Vec3 m = cross(o, d);
      std::size_t i = (std::size_t(r) * res_w + c) * 6;
      g.values[i + 0] = d.x;
      g.values[i + 1] = d.y;
      g.values[i + 2] = d.z;
      g.values[i + 3] = m.x;
      g.values[i + 4] = m.y;
      g.values[i + 5] = m.z;
    }
  }
  return g;
}

std::vector<Scene> generate_scene_set(const SceneSetSpec& spec, Rng& rng) {
  if (spec.num_scenes < 1)
    throw std::invalid_argument("generate_scene_set: need >= 1 scene");
  if (spec.num_views < 2)
    throw std::invalid_argument("generate_scene_set: need >= 2 cameras");
  if (!(spec.spread_deg > 0.0 && spec.spread_deg <= 180.0))
    throw std::invalid_argument(
        "generate_scene_set: spread must be in (0, 180] degrees");

  std::vector<Scene> scenes;
  scenes.reserve(std::size_t(spec.num_scenes));
  for (int si = 0; si < spec.num_scenes; ++si) {
    Scene sc;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", si);
    sc.name = buf;

    // Main sphere near the origin plus smaller occluders around it.
    int n_prim = spec.min_primitives +
                 int(rng.below(std::uint64_t(spec.max_primitives -
                                             spec.min_primitives + 1)));
    double main_r = rng.uniform(spec.min_size / 2.0, spec.max_size / 2.0);
    Sphere main;
    main.center = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                   rng.uniform(-0.05, 0.05)};
    main.radius = main_r;
    main.albedo = rng.uniform(0.4, 1.0);
    sc.spheres.push_back(main);

    // Cameras frame the main primitive; occluders orbit close to it and may
    // clip the frame edge, like object-centric crops.
    double scene_radius = main_r + norm(main.center);
    for (int p = 1; p < n_prim; ++p) {
      double size = rng.uniform(0.25, 0.5) * main_r;
      double az = rng.uniform(0, 2 * M_PI);
      double el = rng.uniform(-0.9, 0.9);
      double ce = std::cos(el);
      Vec3 offset{ce * std::cos(az), ce * std::sin(az), std::sin(el)};
      Vec3 center = main.center + offset * ((main_r + size) *
                                            rng.uniform(0.7, 1.0));
      double albedo = rng.uniform(0.3, 1.0);
      if (rng.below(2) == 0) {
        sc.spheres.push_back({center, size, albedo});
      } else {
        Vec3 he{size * rng.uniform(0.6, 1.2), size * rng.uniform(0.6, 1.2),
                size * rng.uniform(0.6, 1.2)};
        sc.boxes.push_back({center, he, albedo});
      }
    }

    // Camera arc: all directions in one plane through the origin, so that
    // relative rotation between any two cameras equals their arc separation.
    double az0 = rng.uniform(0, 2 * M_PI);
    double el0 = rng.uniform(-0.6, 0.6);
    Vec3 u0{std::cos(el0) * std::cos(az0), std::cos(el0) * std::sin(az0),
            std::sin(el0)};
    Vec3 helper{std::sin(az0), -std::cos(az0), 0};
    Vec3 n = normalized(cross(u0, helper));

    const int img = 128;  // intrinsic reference resolution
    double spread_rad = spec.spread_deg * M_PI / 180.0;
    for (int f = 0; f < spec.num_views; ++f) {
      double theta = (f == 0) ? 0.0 : rng.uniform(0.0, spread_rad);
      Vec3 uf = Mat3::axis_angle(n, theta) * u0;
      double dist = scene_radius * rng.uniform(2.2, 2.8);
      double half_fov = std::atan2(scene_radius * 1.05, dist);
      double focal = (img / 2.0) / std::tan(half_fov);
      sc.cameras.push_back(make_lookat_camera(uf * dist, Vec3{0, 0, 0}, n,
                                              focal, focal, img, img));
    }
    scenes.push_back(std::move(sc));
  }
  return scenes;
}

std::string scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["name"] = scene.name;
  j["primitives"] = nlohmann::json::array();
  for (const auto& s : scene.spheres) {
    j["primitives"].push_back({{"type", "sphere"},
                               {"center", {s.center.x, s.center.y, s.center.z}},
                               {"radius", s.radius},
                               {"albedo", s.albedo}});
  }
  for (const auto& b : scene.boxes) {
    j["primitives"].push_back(
        {{"type", "box"},
         {"center", {b.center.x, b.center.y, b.center.z}},
         {"half_extents", {b.half_extents.x, b.half_extents.y,
                           b.half_extents.z}},
         {"albedo", b.albedo}});
  }
  j["cameras"] = nlohmann::json::array();
  for (const auto& c : scene.cameras) {
    nlohmann::json cj;
    cj["fx"] = c.fx;
    cj["fy"] = c.fy;
    cj["cx"] = c.cx;
    cj["cy"] = c.cy;
    cj["width"] = c.width;
    cj["height"] = c.height;
    cj["R"] = c.R.m;
    cj["t"] = {c.t.x, c.t.y, c.t.z};
    j["cameras"].push_back(cj);
  }
  return j.dump(2);
}

Scene scene_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  Scene sc;
  sc.name = j.at("name").get<std::string>();
  for (const auto& p : j.at("primitives")) {
    std::string type = p.at("type").get<std::string>();
    auto c = p.at("center");
    Vec3 center{c[0], c[1], c[2]};
    double albedo = p.at("albedo").get<double>();
    if (type == "sphere") {
      sc.spheres.push_back({center, p.at("radius").get<double>(), albedo});
    } else if (type == "box") {
      auto he = p.at("half_extents");
      sc.boxes.push_back({center, Vec3{he[0], he[1], he[2]}, albedo});
    } else {
      throw std::invalid_argument("unknown primitive type: " + type);
    }
  }
  for (const auto& cj : j.at("cameras")) {
    Camera cam;
    cam.fx = cj.at("fx").get<double>();
    cam.fy = cj.at("fy").get<double>();
    cam.cx = cj.at("cx").get<double>();
    cam.cy = cj.at("cy").get<double>();
    cam.width = cj.at("width").get<int>();
    cam.height = cj.at("height").get<int>();
    for (int i = 0; i < 9; ++i) cam.R.m[std::size_t(i)] = cj.at("R")[i];
    cam.t = {cj.at("t")[0], cj.at("t")[1], cj.at("t")[2]};
    validate_camera(cam);
    sc.cameras.push_back(cam);
  }
  if (sc.spheres.empty() && sc.boxes.empty())
    throw std::invalid_argument("scene has no primitives");
  if (sc.cameras.size() < 2)
    throw std::invalid_argument("scene needs at least two cameras");
  return sc;
}

void save_scene_dir(const Scene& scene, const std::filesystem::path& dir,
                    int res_h, int res_w) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "scene.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write scene.json");
    f << scene_to_json(scene);
  }
  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    Pointmap pm = render_pointmap(scene, int(v), res_h, res_w);
    Tensor<double> pt({std::uint64_t(res_h), std::uint64_t(res_w), 3},
                      pm.values);
    save_tensor(dir / (std::to_string(v) + ".pointmap.camt"), pt);

    PluckerGrid pg = plucker_embedding(scene.cameras[v], res_h, res_w);
    Tensor<double> gt({std::uint64_t(res_h), std::uint64_t(res_w), 6},
                      pg.values);
    save_tensor(dir / (std::to_string(v) + ".plucker.camt"), gt);
  }
}

Scene load_scene_dir(const std::filesystem::path& dir) {
  std::ifstream f(dir / "scene.json");
  if (!f) throw std::runtime_error("cannot read scene.json in " +
                                   dir.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return scene_from_json(text);
}

}  // namespace cameo
