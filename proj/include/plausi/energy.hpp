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

#include "plausi/error.hpp"
#include "plausi/geometry.hpp"
#include "plausi/ground_plane.hpp"
#include "plausi/image.hpp"
#include "plausi/renderer.hpp"
#include "plausi/shape_manifold.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace plausi {

/// Importance factors (sil, cd, hog, rot) plus an optional penalty on shape weights
/// leaving [-1, 1] (off unless set).
struct EnergyWeights
{
    double sil = 0.0;
    double cd = 0.0;
    double hog = 0.0;
    double rot = 0.0;
    double barrier = 0.0;

    static EnergyWeights c1() { return {0.5, 10.0, 5.0, 5.0, 0.0}; }
    static EnergyWeights c2() { return {10.0, 0.1, 1.0, 50.0, 0.0}; }
    /// c2 with the shape barrier enabled.
    static EnergyWeights c2_with_barrier() { return {10.0, 0.1, 1.0, 50.0, 1e4}; }

    void validate() const
    {
        if (sil < 0.0 || cd < 0.0 || hog < 0.0 || rot < 0.0 || barrier < 0.0) {
            throw ConfigError("energy weights must be non-negative");
        }
        if (!(sil > 0.0 || cd > 0.0 || hog > 0.0 || rot > 0.0)) {
            throw ConfigError("at least one energy weight must be positive");
        }
    }

    EnergyWeights scaled(double s) const { return {sil * s, cd * s, hog * s, rot * s, barrier * s}; }
};

struct EnergyBreakdown
{
    double e_sil = 0.0;
    double e_cd = 0.0;
    double e_hog = 0.0;
    double e_rot = 0.0;
    double total = 0.0;
};

/// Per-pixel foreground probability over the evaluated grid of a region; the
/// background probability is 1 - p_fg.
struct MaskProbabilities
{
    PixelRect region;
    int stride = 1;
    int cols = 0;
    int rows = 0;
    double floor = 0.01;
    std::vector<double> p_fg;
};

inline MaskProbabilities mask_probabilities(const BinaryMask& mask, const PixelRect& region, int stride,
                                            double floor = 0.01)
{
    if (region.empty() || stride < 1) {
        throw ConfigError("mask region is empty");
    }
    if (!(floor > 0.0 && floor < 0.5)) {
        throw ConfigError("mask probability floor must lie in (0, 0.5)");
    }
    MaskProbabilities mp;
    mp.region = region;
    mp.stride = stride;
    mp.floor = floor;
    std::tie(mp.cols, mp.rows) = evaluated_grid(region, stride);
    mp.p_fg.resize(static_cast<std::size_t>(mp.cols * mp.rows));
    for (int r = 0; r < mp.rows; ++r) {
        for (int c = 0; c < mp.cols; ++c) {
            const int u = region.u0 + c * stride, v = region.v0 + r * stride;
            const bool on = u < mask.width && v < mask.height && mask.at(u, v);
            mp.p_fg[static_cast<std::size_t>(r * mp.cols + c)] = on ? 1.0 - floor : floor;
        }
    }
    return mp;
}

/// rho(x) = x for x <= eps, 2 sqrt(x) - eps otherwise; x is a squared distance.
inline double huber(double x, double eps)
{
    if (x < 0.0) {
        throw DomainError("huber input must be non-negative");
    }
    return x <= eps ? x : 2.0 * std::sqrt(x) - eps;
}

namespace detail {

/// huber(d * d, eps) from the unsquared distance; keeps 2 delta - eps an exact ceiling.
inline double huber_of_distance(double d, double eps)
{
    const double a = std::abs(d);
    const double x = a * a;
    return x <= eps ? x : 2.0 * a - eps;
}

} // namespace detail

/// Mean robustified squared TSDF value over object-frame points, at most huber(delta^2).
inline double energy_cd(std::span<const Vec3> points_obj, const ShapeManifold& m, const ShapeWeights& z, double eps)
{
    if (points_obj.empty()) {
        throw PreconditionError("energy_cd needs at least one point");
    }
    const ShapeWeights zc = ShapeManifold::clamp_weights(z);
    double sum = 0.0;
    for (const Vec3& x : points_obj) {
        sum += detail::huber_of_distance(m.evaluate_clamped(zc, x), eps);
    }
    return std::min(sum / static_cast<double>(points_obj.size()), detail::huber_of_distance(m.truncation(), eps));
}

/// energy_cd for ego-frame points and an object pose.
inline double energy_cd(std::span<const Vec3> points_ego, const Pose& pose, const ShapeManifold& m,
                        const ShapeWeights& z, double eps)
{
    if (points_ego.empty()) {
        throw PreconditionError("energy_cd needs at least one point");
    }
    const ShapeWeights zc = ShapeManifold::clamp_weights(z);
    const Mat3 r_inv = quat_to_matrix(pose.q).transpose();
    double sum = 0.0;
    for (const Vec3& p : points_ego) {
        sum += detail::huber_of_distance(m.evaluate_clamped(zc, r_inv * (p - pose.t)), eps);
    }
    return std::min(sum / static_cast<double>(points_ego.size()), detail::huber_of_distance(m.truncation(), eps));
}

/// Largest per-pixel silhouette residual given the mask floor and projection range.
inline double silhouette_ceiling(double mask_floor, double pi_floor)
{
    return -std::log(mask_floor + (1.0 - 2.0 * mask_floor) * pi_floor);
}

/// Mean of -ln(p_fg pi + p_bg (1 - pi)) over evaluated pixels, divided by the largest
/// attainable residual so the result lies in [0, 1].
inline double energy_sil(const MaskProbabilities& mask, const SilhouetteImage& sil)
{
    if (!(mask.region == sil.region) || mask.stride != sil.stride || mask.p_fg.size() != sil.values.size()) {
        throw ConfigError("mask and silhouette cover different pixel grids");
    }
    if (sil.values.empty()) {
        throw ConfigError("silhouette has no evaluated pixels");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < sil.values.size(); ++i) {
        const double pf = mask.p_fg[i];
        const double pi = sil.values[i];
        sum += -std::log(pf * pi + (1.0 - pf) * (1.0 - pi));
    }
    const double mean = sum / static_cast<double>(sil.values.size());
    return std::min(1.0, mean / silhouette_ceiling(mask.floor, sil.pi_floor));
}

/// Squared height of the box bottom over the ground below its center.
inline double energy_hog(const Pose& pose, double box_height, const GroundPlane& g)
{
    const double d = pose.t.z() - 0.5 * box_height - ground_height(g, pose.t.x(), pose.t.y());
    return d * d;
}

/// (1 - r3 . n)^2 with r3 = R (0, 0, 1)^T, the object up axis in the ego frame.
inline double energy_rot(const Mat3& r, const Vec3& ground_normal)
{
    const double c = 1.0 - r.col(2).dot(ground_normal);
    return c * c;
}

/// Call counters for the expensive stages; shared between threads.
struct WorkCounters
{
    std::atomic<std::uint64_t> renders{0};
    std::atomic<std::uint64_t> optimizations{0};
};

/// Everything the composite energy needs besides the state. Non-owning.
struct EnergyContext
{
    std::span<const Vec3> points_ego;
    const MaskProbabilities* mask = nullptr;
    GroundPlane plane;
    const CameraModel* camera = nullptr;
    const ShapeManifold* manifold = nullptr;
    Vec3 box_dims = Vec3::Ones();
    RenderConfig render;
    double huber_eps = 0.01;
    WorkCounters* counters = nullptr;
};

namespace detail {

inline double shape_barrier(const ShapeWeights& z)
{
    double b = 0.0;
    for (double v : z) {
        const double ex = std::max(0.0, std::abs(v) - 1.0);
        b += ex * ex;
    }
    return b;
}

inline double term_sil(const StateVector& s, const EnergyContext& ctx)
{
    if (ctx.mask == nullptr || ctx.camera == nullptr || ctx.manifold == nullptr) {
        throw PreconditionError("silhouette energy needs mask, camera and manifold");
    }
    if (ctx.counters) ctx.counters->renders.fetch_add(1, std::memory_order_relaxed);
    const SilhouetteImage img =
        render_silhouette(*ctx.manifold, s.shape(), s.pose(), *ctx.camera, ctx.mask->region, ctx.render);
    return energy_sil(*ctx.mask, img);
}

inline double term_cd(const StateVector& s, const EnergyContext& ctx)
{
    if (ctx.manifold == nullptr) {
        throw PreconditionError("chamfer energy needs a manifold");
    }
    return energy_cd(ctx.points_ego, s.pose(), *ctx.manifold, s.shape(), ctx.huber_eps);
}

inline EnergyBreakdown evaluate_terms(const StateVector& raw, const EnergyContext& ctx, const EnergyWeights& w,
                                      bool skip_unweighted)
{
    const StateVector s = raw.normalized();
    const Pose pose = s.pose();
    EnergyBreakdown e;
    if (!skip_unweighted || w.sil > 0.0) e.e_sil = term_sil(s, ctx);
    if (!skip_unweighted || w.cd > 0.0) e.e_cd = term_cd(s, ctx);
    if (!skip_unweighted || w.hog > 0.0) e.e_hog = energy_hog(pose, ctx.box_dims.z(), ctx.plane);
    if (!skip_unweighted || w.rot > 0.0) e.e_rot = energy_rot(pose.rotation(), ctx.plane.normal());
    e.total = w.sil * e.e_sil + w.cd * e.e_cd + w.hog * e.e_hog + w.rot * e.e_rot;
    if (w.barrier > 0.0) {
        e.total += w.barrier * shape_barrier(raw.shape());
    }
    return e;
}

} // namespace detail

/// All four terms at the state (quaternion renormalized first) and their weighted sum.
inline EnergyBreakdown composite_energy(const StateVector& state, const EnergyContext& ctx, const EnergyWeights& w)
{
    w.validate();
    return detail::evaluate_terms(state, ctx, w, false);
}

/// Weighted sum only; terms with zero weight are not evaluated. Bit-identical to
/// composite_energy(...).total.
inline double composite_total(const StateVector& state, const EnergyContext& ctx, const EnergyWeights& w)
{
    return detail::evaluate_terms(state, ctx, w, true).total;
}

} // namespace plausi
