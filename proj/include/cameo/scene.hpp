#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cameo/camera.hpp"
#include "cameo/geometry.hpp"
#include "cameo/rng.hpp"

namespace cameo {

struct Sphere {
  Vec3 center;
  double radius = 0;
  double albedo = 1;
};

struct AxisBox {
  Vec3 center;
  Vec3 half_extents;
  double albedo = 1;
};

struct Scene {
  std::string name;
  std::vector<Sphere> spheres;
  std::vector<AxisBox> boxes;
  std::vector<Camera> cameras;
};

// Per-pixel world coordinates; misses carry NaN in all three channels.
struct Pointmap {
  int h = 0, w = 0;
  std::vector<double> values;       // h*w*3
  std::vector<std::uint8_t> valid;  // h*w

  Vec3 point(int r, int c) const {
    std::size_t i = (std::size_t(r) * w + c) * 3;
    return {values[i], values[i + 1], values[i + 2]};
  }
};

// Per-pixel (unit direction, moment o x d) line coordinates.
struct PluckerGrid {
  int h = 0, w = 0;
  std::vector<double> values;  // h*w*6
};

struct SurfaceHit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 point;
  Vec3 normal;
  double albedo = 0;
  bool hit() const { return std::isfinite(t); }
};

// Closest intersection of the ray origin + t*dir (t > eps) with the scene.
SurfaceHit trace_first_hit(const Scene& scene, const Vec3& origin,
                           const Vec3& dir);

// True when `point` is the first surface the camera sees along the ray from
// its center through the point (tolerance relative to distance).
bool point_visible_from(const Scene& scene, const Camera& cam,
                        const Vec3& point, double rel_tol = 1e-4);

Pointmap render_pointmap(const Scene& scene, int cam_index, int res_h,
                         int res_w);

// Pointmap plus per-pixel depth, normal and lambertian shading, rendered in
// one pass for dataset construction.
struct RenderedView {
  Pointmap pointmap;
  std::vector<double> depth;    // h*w, NaN on miss
  std::vector<double> normal;   // h*w*3, NaN on miss
  std::vector<double> shading;  // h*w, 0 on miss
};

RenderedView render_view(const Scene& scene, int cam_index, int res_h,
                         int res_w);

PluckerGrid plucker_embedding(const Camera& cam, int res_h, int res_w);

struct SceneSetSpec {
  int num_scenes = 1;
  int num_views = 4;
  double spread_deg = 120.0;
  int min_primitives = 2;
  int max_primitives = 4;
  double min_size = 0.2;  // object diameters, meters
  double max_size = 1.0;
};

// Deterministic given the rng seed. Cameras sit on one great-circle arc of a
// sphere around the geometry looking at the origin, so every pairwise
// relative rotation equals the arc separation and stays <= spread_deg.
std::vector<Scene> generate_scene_set(const SceneSetSpec& spec, Rng& rng);

// JSON manifest (cameras + primitives + name).
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& json_text);

void save_scene_dir(const Scene& scene, const std::filesystem::path& dir,
                    int res_h, int res_w);
Scene load_scene_dir(const std::filesystem::path& dir);

}  // namespace cameo
