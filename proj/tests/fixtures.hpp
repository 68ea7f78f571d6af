// Copyright 2026 The plausi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "plausi/pipeline.hpp"
#include "plausi/synthgen.hpp"

#include <filesystem>
#include <string>

namespace plausi::testing {

inline const ShapeManifold& default_manifold()
{
    static const ShapeManifold m = build_default_manifold();
    return m;
}

/// One mean-sized car straight ahead on flat ground.
inline SceneSpec single_car_spec(double x = 12.0, double y = 0.0, double yaw = 0.4, std::uint64_t seed = 3)
{
    SceneSpec s;
    s.n_cars = 1;
    ObjectPlacement p;
    p.x = x;
    p.y = y;
    p.yaw = yaw;
    s.placements.push_back(p);
    s.seed = seed;
    return s;
}

/// Points on the zero level set of shape z at `pose`, seen from `sensor` (ego frame),
/// plus Gaussian noise of `sigma` along each ray.
inline std::vector<Vec3> surface_points(const ShapeManifold& m, const ShapeWeights& z, const Pose& pose,
                                        const Vec3& sensor, int n, double sigma, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<Vec3> out;
    const Mat3 r_inv = pose.rotation().transpose();
    const Vec3 o = r_inv * (sensor - pose.t);
    const double radius = 2.5;
    for (int attempt = 0; attempt < 50 * n && static_cast<int>(out.size()) < n; ++attempt) {
        const Vec3 target(rng.uniform(-radius, radius), rng.uniform(-1.2, 1.2), rng.uniform(-1.0, 1.0));
        const Vec3 d = (target - o).normalized();
        double prev_s = 0.0, s = 0.0;
        bool hit = false;
        const double s_end = (target - o).norm() + 3.0;
        for (s = 0.5; s < s_end; s += 0.01) {
            if (m.evaluate(z, o + s * d) < 0.0) {
                hit = true;
                break;
            }
            prev_s = s;
        }
        if (!hit) continue;
        double lo = prev_s, hi = s;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (m.evaluate(z, o + mid * d) < 0.0 ? hi : lo) = mid;
        }
        const double range = 0.5 * (lo + hi) + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0);
        out.push_back(transform_point(pose, o + range * d));
    }
    return out;
}

/// A single synthetic car with the pieces the energy terms need, built as the pipeline
/// does for its GT box.
struct CarFixture
{
    GeneratedScene scene;
    BoundingBox3D gt;
    PixelRect region;
    std::vector<Vec3> points;
    MaskProbabilities mask;
    EnergyContext ctx;

    explicit CarFixture(const SceneSpec& spec = single_car_spec(), const PipelineConfig& cfg = {})
        : scene(generate_scene(spec))
    {
        gt = scene.gt_boxes.at(0);
        region = dilate_rect(*projected_box_rect(scene.scene.camera, gt), cfg.region_dilation,
                             scene.scene.camera.width, scene.scene.camera.height);
        std::vector<Vec3> above;
        for (const Vec3& p : scene.scene.cloud) {
            if (scene.scene.plane.signed_distance(p) > cfg.ground_clearance) above.push_back(p);
        }
        points = crop_points_ego(above, gt, cfg.crop_margin, cfg.outlier_radius, cfg.min_neighbors);
        mask = mask_probabilities(scene.scene.masks.at(0), region, cfg.render.downsample, cfg.mask_floor);
        ctx.points_ego = points;
        ctx.mask = &mask;
        ctx.plane = scene.scene.plane;
        ctx.camera = &scene.scene.camera;
        ctx.manifold = &default_manifold();
        ctx.box_dims = gt.dims;
        ctx.render = cfg.render;
        ctx.huber_eps = cfg.huber_eps;
    }

    CarFixture(const CarFixture&) = delete;
    CarFixture& operator=(const CarFixture&) = delete;

    /// GT pose with the manifold projection of the generating car's shape.
    StateVector gt_state() const { return StateVector::pack(gt.pose(), project_shape(scene.objects.at(0).car)); }

    static ShapeWeights project_shape(const ShapeFamilyParams& car)
    {
        const ShapeManifold& m = default_manifold();
        const TsdfGrid g = synthesize_tsdf(car, m.geometry().res, m.truncation());
        ShapeWeights z{};
        for (std::size_t i = 0; i < kNumShapeWeights; ++i) {
            const auto& c = m.components()[i].values;
            double dot = 0.0, nn = 0.0;
            for (std::size_t k = 0; k < c.size(); ++k) {
                dot += (g.values[k] - m.mean().values[k]) * c[k];
                nn += c[k] * c[k];
            }
            z[i] = std::clamp(dot / nn, -1.0, 1.0);
        }
        return z;
    }
};

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("plausi_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace plausi::testing
