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
#include "fixtures.hpp"
#include "plausi/dataset.hpp"
#include "plausi/synthgen.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace plausi {
namespace {

TEST(GenerateScene, EmptySceneHasOnlyGround)
{
    SceneSpec spec;
    spec.n_cars = 0;
    spec.pitch_deg = 2.0;
    spec.seed = 4;
    const GeneratedScene g = generate_scene(spec);
    EXPECT_TRUE(g.gt_boxes.empty());
    EXPECT_TRUE(g.scene.masks.empty());
    ASSERT_FALSE(g.scene.cloud.empty());
    for (std::size_t i = 0; i < g.scene.cloud.size(); ++i) {
        EXPECT_EQ(g.point_ids[i], -1);
        EXPECT_LT(std::abs(g.scene.plane.signed_distance(g.scene.cloud[i])), 0.15);
    }
}

TEST(GenerateScene, SingleCarAtTenMeters)
{
    const GeneratedScene g = generate_scene(testing::single_car_spec(10.0, 0.0, 0.2, 1));
    ASSERT_EQ(g.gt_boxes.size(), 1u);
    ASSERT_EQ(g.scene.masks.size(), 1u);
    EXPECT_GT(g.scene.masks[0].area(), 0);
    const auto pts = crop_points_ego(g.scene.cloud, g.gt_boxes[0], 1.1, 0.5, 4);
    EXPECT_GE(static_cast<int>(pts.size()), PipelineConfig{}.min_points);
}

TEST(GenerateScene, GtBoxesHoldTheirPoints)
{
    SceneSpec spec;
    spec.n_cars = 3;
    spec.seed = 21;
    const GeneratedScene g = generate_scene(spec);
    ASSERT_EQ(g.gt_boxes.size(), 3u);
    for (std::size_t k = 0; k < g.gt_boxes.size(); ++k) {
        int total = 0, inside = 0;
        for (std::size_t i = 0; i < g.scene.cloud.size(); ++i) {
            if (g.point_ids[i] != static_cast<int>(k)) continue;
            ++total;
            inside += g.gt_boxes[k].contains(g.scene.cloud[i], 1.1);
        }
        ASSERT_GT(total, 0) << k;
        EXPECT_GE(inside, 0.99 * total) << k;
    }
}

TEST(GenerateScene, Deterministic)
{
    SceneSpec spec;
    spec.n_cars = 2;
    spec.seed = 8;
    spec.roll_deg = -1.5;
    const GeneratedScene a = generate_scene(spec);
    const GeneratedScene b = generate_scene(spec);
    EXPECT_EQ(a.scene.cloud, b.scene.cloud);
    EXPECT_EQ(a.scene.masks, b.scene.masks);
    EXPECT_EQ(a.point_ids, b.point_ids);
    spec.seed = 9;
    EXPECT_NE(generate_scene(spec).scene.cloud, a.scene.cloud);
}

TEST(GenerateScene, InvalidSpec)
{
    SceneSpec spec;
    spec.n_cars = 7;
    EXPECT_THROW(generate_scene(spec), ConfigError);
    spec.n_cars = 1;
    spec.pitch_deg = 8.0;
    EXPECT_THROW(generate_scene(spec), ConfigError);
}

TEST(Lidar, RingRadiusOnFlatGround)
{
    LidarConfig cfg;
    cfg.beams = 1;
    cfg.elevation_min_deg = cfg.elevation_max_deg = -10.0;
    cfg.range_noise = 0.0;
    const GroundPlane flat;
    const LidarScan scan = simulate_lidar(&flat, {}, cfg, 0);
    ASSERT_EQ(static_cast<int>(scan.points.size()), cfg.azimuth_count());
    const double radius = cfg.origin.z() / std::tan(deg2rad(10.0));
    for (const Vec3& p : scan.points) {
        EXPECT_NEAR(std::hypot(p.x(), p.y()), radius, 1e-3);
        EXPECT_LT(std::abs(p.z()), 1e-4);
    }
}

TEST(Lidar, NoiselessHitsLieOnTiltedPlane)
{
    LidarConfig cfg;
    cfg.beams = 8;
    cfg.range_noise = 0.0;
    cfg.azimuth_res_deg = 2.0;
    const GroundPlane g = tilted_ground(3.0, -2.0);
    const LidarScan scan = simulate_lidar(&g, {}, cfg, 0);
    ASSERT_FALSE(scan.points.empty());
    for (const Vec3& p : scan.points) EXPECT_LT(std::abs(g.signed_distance(p)), 1e-4);
}

TEST(Lidar, CarShadowsGround)
{
    const GeneratedScene g = generate_scene(testing::single_car_spec(10.0, 0.0, 0.0, 2));
    const double far_face = g.gt_boxes[0].center.x() + 0.5 * g.gt_boxes[0].dims.x();
    int car_hits = 0;
    for (std::size_t i = 0; i < g.scene.cloud.size(); ++i) {
        const Vec3& p = g.scene.cloud[i];
        if (g.point_ids[i] == 0) ++car_hits;
        if (g.point_ids[i] != -1) continue;
        const bool behind = std::abs(std::atan2(p.y(), p.x())) < deg2rad(2.0) && p.x() > far_face + 0.5 && p.x() < 25.0;
        EXPECT_FALSE(behind) << p.transpose();
    }
    EXPECT_GT(car_hits, 100);
}

TEST(Perturb, ZeroJitterReproducesGt)
{
    const GeneratedScene g = generate_scene(testing::single_car_spec());
    PerturbSpec ps;
    ps.tp_sigma_t = 0.0;
    ps.tp_sigma_yaw_deg = 0.0;
    ps.count = 6;
    const auto hs = perturb_hypotheses(g.gt_boxes, ps, 3);
    int tps = 0;
    for (const auto& h : hs) {
        if (!h.is_tp) continue;
        ++tps;
        EXPECT_EQ(h.hypothesis.box.center, g.gt_boxes[0].center);
        EXPECT_EQ(h.hypothesis.box.dims, g.gt_boxes[0].dims);
    }
    EXPECT_EQ(tps, 3);
}

TEST(Perturb, FloatModeRaisesBox)
{
    const GeneratedScene g = generate_scene(testing::single_car_spec());
    PerturbSpec ps;
    ps.fp_weights = {0, 1, 0, 0, 0};
    ps.count = 10;
    for (const auto& h : perturb_hypotheses(g.gt_boxes, ps, 5)) {
        if (h.is_tp) continue;
        EXPECT_EQ(h.mode, "float");
        EXPECT_GE(h.hypothesis.box.center.z() - g.gt_boxes[0].center.z(), 1.0);
    }
}

TEST(Perturb, BalanceLabelsAndDeterminism)
{
    SceneSpec spec;
    spec.n_cars = 3;
    spec.seed = 13;
    const GeneratedScene g = generate_scene(spec);
    PerturbSpec ps;
    ps.ground = g.scene.plane;
    ps.count = 20;
    const auto hs = perturb_hypotheses(g.gt_boxes, ps, 17);
    ASSERT_EQ(hs.size(), 20u);
    int tps = 0;
    for (const auto& h : hs) {
        double best = 0.0;
        for (const auto& b : g.gt_boxes) best = std::max(best, box_iou(h.hypothesis.box, b));
        if (h.is_tp) {
            ++tps;
            EXPECT_GT(best, 0.5);
        } else {
            EXPECT_LE(best, 0.5) << h.mode;
        }
    }
    EXPECT_EQ(tps, 10);
    const auto again = perturb_hypotheses(g.gt_boxes, ps, 17);
    for (std::size_t i = 0; i < hs.size(); ++i) {
        EXPECT_EQ(hs[i].hypothesis.id, again[i].hypothesis.id);
        EXPECT_EQ(hs[i].hypothesis.box.center, again[i].hypothesis.box.center);
        EXPECT_EQ(hs[i].mode, again[i].mode);
    }
    EXPECT_THROW(perturb_hypotheses({}, ps, 1), PreconditionError);
}

TEST(Dataset, DeterministicAndBalanced)
{
    DatasetSpec spec;
    spec.scenes = 2;
    spec.hypotheses_per_scene = 6;
    const auto a = generate_dataset(spec, 77);
    const auto b = generate_dataset(spec, 77);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, scene_id(static_cast<int>(i)));
        EXPECT_EQ(a[i].generated.scene.cloud, b[i].generated.scene.cloud);
        int tps = 0;
        for (const auto& h : a[i].hypotheses) tps += h.is_tp;
        EXPECT_EQ(2 * tps, static_cast<int>(a[i].hypotheses.size()));
    }
}

TEST(MorphMask, DilateErode)
{
    BinaryMask m(20, 20);
    m.set(10, 10, true);
    const BinaryMask d = morph_mask(m, 2);
    EXPECT_EQ(d.bounds(), (PixelRect{8, 8, 13, 13}));
    EXPECT_EQ(morph_mask(d, -2).bounds(), (PixelRect{10, 10, 11, 11}));
    EXPECT_EQ(morph_mask(m, 0), m);
}

} // namespace
} // namespace plausi
