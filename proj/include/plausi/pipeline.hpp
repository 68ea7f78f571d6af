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

#include "plausi/energy.hpp"
#include "plausi/error.hpp"
#include "plausi/geometry.hpp"
#include "plausi/ground_plane.hpp"
#include "plausi/image.hpp"
#include "plausi/optimizer.hpp"
#include "plausi/shape_family.hpp"
#include "plausi/shape_manifold.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace plausi {

struct Hypothesis
{
    BoundingBox3D box;
    double score = 1.0;
    std::string id;
};

/// One sensor frame: LiDAR cloud and camera in the ego frame plus instance masks.
struct Scene
{
    CameraModel camera;
    std::vector<Vec3> cloud;
    std::vector<BinaryMask> masks;
    GroundPlane plane;
};

struct PipelineConfig
{
    double gate_x = 30.0;
    double gate_y = 15.0;
    int min_points = 20;
    double outlier_radius = 0.5;
    int min_neighbors = 4;
    Vec3 dims_lo = 0.75 * ShapeFamilyParams::envelope_min();
    Vec3 dims_hi = 1.25 * ShapeFamilyParams::envelope_max();
    double prior_gate = 1.0;
    double kappa = 0.5;
    double mask_iou_min = 0.3;
    double grad_change_rel = 0.10;
    /// Absolute e_cd slack of the step-2 change check; covers the drift clean cars show
    /// under the silhouette-heavy weights.
    double grad_change_abs = 0.3;
    EnergyWeights weights_c1 = EnergyWeights::c1();
    EnergyWeights weights_c2 = EnergyWeights::c2();

    double crop_margin = 1.1;
    /// Points closer than this to the ground plane are not object points.
    double ground_clearance = 0.1;
    /// Scale of the projected hypothesis rectangle that bounds the silhouette region.
    double region_dilation = 1.2;
    double mask_floor = 0.01;
    double huber_eps = 0.01;
    RenderConfig render;
    OptimizerConfig step1 = default_step(OptimMethod::BoundedLbfgs, 100);
    OptimizerConfig step2 = default_step(OptimMethod::Bfgs, 30);

    static OptimizerConfig default_step(OptimMethod method, int max_iters)
    {
        OptimizerConfig c;
        c.method = method;
        c.max_iters = max_iters;
        c.initial_step = 0.1;
        return c;
    }

    void validate() const
    {
        if (!(gate_x > 0.0 && gate_y > 0.0 && min_points > 0 && outlier_radius > 0.0 && min_neighbors >= 0 &&
              prior_gate > 0.0 && kappa > 0.0 && mask_iou_min > 0.0 && grad_change_rel > 0.0 && grad_change_abs >= 0.0 &&
              crop_margin > 0.0 && ground_clearance >= 0.0 && region_dilation > 0.0)) {
            throw ConfigError("pipeline thresholds must be positive");
        }
        if (!((dims_lo.array() > 0.0).all() && (dims_hi.array() > dims_lo.array()).all())) {
            throw ConfigError("box dimension envelope is empty");
        }
        weights_c1.validate();
        weights_c2.validate();
        render.validate();
        step1.validate();
        step2.validate();
    }
};

enum class Stage { GatedDistance, GatedDims, GatedPoints, GatedNoMask, GatedPrior, Optimized };

inline const char* to_string(Stage s)
{
    switch (s) {
    case Stage::GatedDistance: return "gated-distance";
    case Stage::GatedDims: return "gated-dims";
    case Stage::GatedPoints: return "gated-points";
    case Stage::GatedNoMask: return "gated-no-mask";
    case Stage::GatedPrior: return "gated-prior";
    case Stage::Optimized: return "optimized";
    }
    return "?";
}

inline std::optional<Stage> stage_from_string(const std::string& s)
{
    for (Stage st : {Stage::GatedDistance, Stage::GatedDims, Stage::GatedPoints, Stage::GatedNoMask,
                     Stage::GatedPrior, Stage::Optimized}) {
        if (s == to_string(st)) {
            return st;
        }
    }
    return std::nullopt;
}

struct Verdict
{
    std::string id;
    Stage stage = Stage::Optimized;
    double prior_energy = 0.0; ///< e_hog + e_rot at the hypothesis pose
    EnergyBreakdown breakdown_c1;
    EnergyBreakdown breakdown_c2;
    double final_energy = 0.0;
    bool plausible = false;
    bool fp_flag = false; ///< e_cd rose notably during step 2
    std::optional<StateVector> optimized_state;
    int iters_c1 = 0;
    int iters_c2 = 0;
    int point_count = 0;
    std::string diagnostic;
};

/// 1 iff energy <= kappa; NaN is implausible.
inline int decide(double final_energy, double kappa, std::string* diagnostic = nullptr)
{
    if (std::isnan(final_energy)) {
        if (diagnostic) *diagnostic = "final energy is NaN";
        return 0;
    }
    return final_energy <= kappa ? 1 : 0;
}

/// Indices of points inside the box scaled by `margin`. No outlier removal.
inline std::vector<std::size_t> crop_indices(std::span<const Vec3> cloud, const BoundingBox3D& box,
                                             double margin = 1.1)
{
    box.validate();
    const Mat3 r_inv = quat_to_matrix(box.orientation).transpose();
    const Vec3 half = 0.5 * margin * box.dims;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 l = r_inv * (cloud[i] - box.center);
        if (std::abs(l.x()) <= half.x() && std::abs(l.y()) <= half.y() && std::abs(l.z()) <= half.z()) {
            out.push_back(i);
        }
    }
    return out;
}

/// Drops points with fewer than `min_neighbors` other points within `radius`.
inline std::vector<Vec3> remove_radius_outliers(std::span<const Vec3> pts, double radius, int min_neighbors)
{
    if (min_neighbors <= 0) {
        return {pts.begin(), pts.end()};
    }
    struct KeyHash
    {
        std::size_t operator()(const std::array<std::int64_t, 3>& k) const
        {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (auto v : k) {
                h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            }
            return static_cast<std::size_t>(h);
        }
    };
    const auto key = [radius](const Vec3& p) {
        return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / radius)),
                                           static_cast<std::int64_t>(std::floor(p.y() / radius)),
                                           static_cast<std::int64_t>(std::floor(p.z() / radius))};
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, KeyHash> cells;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        cells[key(pts[i])].push_back(i);
    }
    const double r2 = radius * radius;
    std::vector<Vec3> kept;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto k = key(pts[i]);
        int count = 0;
        for (std::int64_t dx = -1; dx <= 1 && count < min_neighbors; ++dx) {
            for (std::int64_t dy = -1; dy <= 1 && count < min_neighbors; ++dy) {
                for (std::int64_t dz = -1; dz <= 1 && count < min_neighbors; ++dz) {
                    const auto it = cells.find({k[0] + dx, k[1] + dy, k[2] + dz});
                    if (it == cells.end()) continue;
                    for (std::size_t j : it->second) {
                        if (j != i && (pts[j] - pts[i]).squaredNorm() <= r2 && ++count >= min_neighbors) {
                            break;
                        }
                    }
                }
            }
        }
        if (count >= min_neighbors) {
            kept.push_back(pts[i]);
        }
    }
    return kept;
}

/// Ego-frame points of the box (scaled by `margin`) after radius-outlier removal.
inline std::vector<Vec3> crop_points_ego(std::span<const Vec3> cloud, const BoundingBox3D& box, double margin,
                                         double outlier_radius, int min_neighbors)
{
    std::vector<Vec3> inside;
    for (std::size_t i : crop_indices(cloud, box, margin)) {
        inside.push_back(cloud[i]);
    }
    return remove_radius_outliers(inside, outlier_radius, min_neighbors);
}

/// crop_points_ego expressed in the box frame.
inline std::vector<Vec3> crop_points(std::span<const Vec3> cloud, const BoundingBox3D& box, double margin = 1.1,
                                     double outlier_radius = 0.5, int min_neighbors = 4)
{
    std::vector<Vec3> pts = crop_points_ego(cloud, box, margin, outlier_radius, min_neighbors);
    const Pose pose = box.pose();
    for (Vec3& p : pts) {
        p = inverse_transform_point(pose, p);
    }
    return pts;
}

/// Index of the mask whose bounding rectangle best overlaps the projected box, or
/// nullopt below `iou_min`. Ties go to the larger mask, then the lower index.
inline std::optional<std::size_t> match_mask(const BoundingBox3D& box, std::span<const PixelRect> mask_bounds,
                                             std::span<const long long> mask_areas, const CameraModel& cam,
                                             double iou_min)
{
    cam.validate();
    const auto rect = projected_box_rect(cam, box);
    if (!rect || rect->empty()) {
        return std::nullopt;
    }
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t i = 0; i < mask_bounds.size(); ++i) {
        const double iou = rect_iou(*rect, mask_bounds[i]);
        const bool better = iou > best_iou || (iou == best_iou && best && mask_areas[i] > mask_areas[*best]);
        if (better) {
            best = i;
            best_iou = iou;
        }
    }
    if (!best || best_iou < iou_min) {
        return std::nullopt;
    }
    return best;
}

inline std::optional<std::size_t> match_mask(const Hypothesis& h, const std::vector<BinaryMask>& masks,
                                             const CameraModel& cam, const PipelineConfig& cfg)
{
    std::vector<PixelRect> bounds;
    std::vector<long long> areas;
    for (const BinaryMask& m : masks) {
        bounds.push_back(m.bounds());
        areas.push_back(m.area());
    }
    return match_mask(h.box, bounds, areas, cam, cfg.mask_iou_min);
}

/// Immutable per-scene state shared by every hypothesis check.
class SceneContext
{
public:
    SceneContext(const Scene& scene, const ShapeManifold& manifold, const PipelineConfig& cfg)
        : scene_(&scene), manifold_(&manifold)
    {
        scene.camera.validate();
        for (const Vec3& p : scene.cloud) {
            if (scene.plane.signed_distance(p) > cfg.ground_clearance) {
                object_points_.push_back(p);
            }
        }
        for (const BinaryMask& m : scene.masks) {
            if (m.width != scene.camera.width || m.height != scene.camera.height) {
                throw DataError("mask size differs from the camera image");
            }
            mask_bounds_.push_back(m.bounds());
            mask_areas_.push_back(m.area());
        }
    }

    const Scene& scene() const { return *scene_; }
    const ShapeManifold& manifold() const { return *manifold_; }
    std::span<const Vec3> object_points() const { return object_points_; }
    std::span<const PixelRect> mask_bounds() const { return mask_bounds_; }
    std::span<const long long> mask_areas() const { return mask_areas_; }

private:
    const Scene* scene_;
    const ShapeManifold* manifold_;
    std::vector<Vec3> object_points_;
    std::vector<PixelRect> mask_bounds_;
    std::vector<long long> mask_areas_;
};

struct Gate
{
    Stage stage;
    double final_energy;
};

/// Result of the cheap checks: the cropped points and matched mask on success.
struct PrefilterResult
{
    std::optional<Gate> gate;
    std::vector<Vec3> points_ego;
    std::optional<std::size_t> mask;
};

/// Per-dimension excess of `dims` over [lo, hi].
inline double dims_violation(const Vec3& dims, const Vec3& lo, const Vec3& hi)
{
    double sq = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double v = std::max({0.0, lo(i) - dims(i), dims(i) - hi(i)});
        sq += v * v;
    }
    return std::sqrt(sq);
}

inline PrefilterResult prefilter(const Hypothesis& h, const SceneContext& ctx, const PipelineConfig& cfg)
{
    PrefilterResult r;
    const Vec3 cam_pos = ctx.scene().camera.center_ego();
    if (std::abs(h.box.center.x() - cam_pos.x()) > cfg.gate_x ||
        std::abs(h.box.center.y() - cam_pos.y()) > cfg.gate_y) {
        r.gate = Gate{Stage::GatedDistance, 2.0 * cfg.kappa};
        return r;
    }
    const double viol = dims_violation(h.box.dims, cfg.dims_lo, cfg.dims_hi);
    if (viol > 0.0) {
        r.gate = Gate{Stage::GatedDims, cfg.kappa + viol};
        return r;
    }
    r.points_ego = crop_points_ego(ctx.object_points(), h.box, cfg.crop_margin, cfg.outlier_radius, cfg.min_neighbors);
    if (static_cast<int>(r.points_ego.size()) < cfg.min_points) {
        r.gate = Gate{Stage::GatedPoints, 2.0 * cfg.kappa};
        return r;
    }
    r.mask = match_mask(h.box, ctx.mask_bounds(), ctx.mask_areas(), ctx.scene().camera, cfg.mask_iou_min);
    if (!r.mask) {
        r.gate = Gate{Stage::GatedNoMask, 2.0 * cfg.kappa};
    }
    return r;
}

namespace detail {

inline VecX to_vec(const StateVector& s)
{
    return Eigen::Map<const VecX>(s.xi.data(), static_cast<Eigen::Index>(StateVector::kSize));
}

inline StateVector from_vec(const VecX& v) { return StateVector::from_span(v.data()); }

} // namespace detail

/// Intermediate results of one verification, for debugging and plots.
struct VerifyTrace
{
    PixelRect region;
    std::size_t mask_index = 0;
    StateVector initial;
    StateVector after_c1;
    StateVector after_c2;
    OptimTrace c1;
    OptimTrace c2;
};

inline Verdict verify_hypothesis(const Hypothesis& h, const SceneContext& ctx, const PipelineConfig& cfg,
                                 WorkCounters* counters = nullptr, VerifyTrace* trace = nullptr)
{
    h.box.validate();
    Verdict v;
    v.id = h.id;
    PrefilterResult pre = prefilter(h, ctx, cfg);
    v.point_count = static_cast<int>(pre.points_ego.size());
    if (pre.gate) {
        v.stage = pre.gate->stage;
        v.final_energy = pre.gate->final_energy;
        v.plausible = false;
        return v;
    }

    const Scene& scene = ctx.scene();
    const Pose pose0{h.box.center, h.box.orientation.normalized()};
    v.prior_energy = energy_hog(pose0, h.box.dims.z(), scene.plane) + energy_rot(pose0.rotation(), scene.plane.normal());
    if (v.prior_energy > cfg.prior_gate) {
        v.stage = Stage::GatedPrior;
        v.final_energy = v.prior_energy;
        v.plausible = false;
        return v;
    }

    v.stage = Stage::Optimized;
    const auto rect = projected_box_rect(scene.camera, h.box);
    const PixelRect region = dilate_rect(*rect, cfg.region_dilation, scene.camera.width, scene.camera.height);
    const MaskProbabilities mask =
        mask_probabilities(scene.masks[*pre.mask], region, cfg.render.downsample, cfg.mask_floor);

    EnergyContext ectx;
    ectx.points_ego = pre.points_ego;
    ectx.mask = &mask;
    ectx.plane = scene.plane;
    ectx.camera = &scene.camera;
    ectx.manifold = &ctx.manifold();
    ectx.box_dims = h.box.dims;
    ectx.render = cfg.render;
    ectx.huber_eps = cfg.huber_eps;
    ectx.counters = counters;

    const StateVector s0 = StateVector::pack(pose0, ShapeWeights{});
    try {
        if (counters) counters->optimizations.fetch_add(1, std::memory_order_relaxed);
        const auto f1 = [&](const VecX& x) { return composite_total(detail::from_vec(x), ectx, cfg.weights_c1); };
        Bounds b1 = Bounds::unbounded(StateVector::kSize);
        for (Eigen::Index i = 7; i < static_cast<Eigen::Index>(StateVector::kSize); ++i) {
            b1.lo(i) = -1.0;
            b1.hi(i) = 1.0;
        }
        const OptimResult r1 = run_optimizer(f1, detail::to_vec(s0), b1, cfg.step1);
        const StateVector s1 = detail::from_vec(r1.x).normalized();
        if (trace) {
            trace->region = region;
            trace->mask_index = *pre.mask;
            trace->initial = s0;
            trace->after_c1 = s1;
            trace->c1 = r1.trace;
        }
        v.breakdown_c1 = composite_energy(s1, ectx, cfg.weights_c1);
        v.iters_c1 = r1.trace.iterations();

        if (counters) counters->optimizations.fetch_add(1, std::memory_order_relaxed);
        const auto f2 = [&](const VecX& x) { return composite_total(detail::from_vec(x), ectx, cfg.weights_c2); };
        const OptimResult r2 = run_optimizer(f2, detail::to_vec(s1), Bounds::unbounded(StateVector::kSize), cfg.step2);
        const StateVector s2 = detail::from_vec(r2.x).normalized();
        v.breakdown_c2 = composite_energy(s2, ectx, cfg.weights_c2);
        v.iters_c2 = r2.trace.iterations();
        v.optimized_state = s2;
        if (trace) {
            trace->after_c2 = s2;
            trace->c2 = r2.trace;
        }
    } catch (const EvaluationError& e) {
        v.final_energy = std::numeric_limits<double>::infinity();
        v.plausible = false;
        v.diagnostic = e.what();
        return v;
    }

    const double cd1 = v.breakdown_c1.e_cd, cd2 = v.breakdown_c2.e_cd;
    if (cd2 > cd1 * (1.0 + cfg.grad_change_rel) + cfg.grad_change_abs) {
        v.fp_flag = true;
        v.final_energy = std::max(cd2, 2.0 * cfg.kappa);
    } else {
        v.final_energy = cd2;
    }
    v.plausible = decide(v.final_energy, cfg.kappa, &v.diagnostic) == 1;
    return v;
}

/// Verifies every hypothesis of a scene on up to `jobs` threads; output order follows
/// the input order.
inline std::vector<Verdict> verify_scene(std::span<const Hypothesis> hyps, const SceneContext& ctx,
                                         const PipelineConfig& cfg, int jobs = 1, WorkCounters* counters = nullptr)
{
    cfg.validate();
    std::vector<Verdict> out(hyps.size());
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(hyps.size())));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            out[i] = verify_hypothesis(hyps[i], ctx, cfg, counters);
        }
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next++; i < hyps.size(); i = next++) {
                    out[i] = verify_hypothesis(hyps[i], ctx, cfg, counters);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

} // namespace plausi
