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
#include "plausi/shape_manifold.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace plausi {

struct RenderConfig
{
    int downsample = 8;     ///< evaluate every k-th pixel per axis
    double ray_step = 0.3;  ///< meters between samples along a ray
    double ray_max = 30.0;  ///< meters
    double xi_sharp = -25.0;
    /// Subdivisions of ray_step used to refine the minimum around the best coarse sample;
    /// 1 keeps only the coarse samples.
    int refine = 4;
    /// Skip samples outside the shape lattice; they evaluate to +delta anyway.
    bool cull = true;

    void validate() const
    {
        if (downsample < 1 || !(ray_step > 0.0) || !(ray_max > ray_step) || !(xi_sharp < 0.0) || refine < 1) {
            throw ConfigError("invalid render configuration");
        }
    }

    int sample_count() const { return static_cast<int>(std::floor(ray_max / ray_step + 1e-9)); }
};

/// Rendered projection values on the evaluated-pixel grid of a region.
struct SilhouetteImage
{
    PixelRect region;
    int stride = 1;
    int cols = 0;
    int rows = 0;
    std::vector<double> values; // row-major, rows x cols
    /// Smallest value the projection can take (at phi = +delta); the largest is 1 - pi_floor.
    double pi_floor = 0.0;

    double at(int col, int row) const { return values[static_cast<std::size_t>(row * cols + col)]; }
    int pixel_u(int col) const { return region.u0 + col * stride; }
    int pixel_v(int row) const { return region.v0 + row * stride; }
};

/// Evaluated-pixel grid dimensions of a region at a stride, anchored at the top-left.
inline std::pair<int, int> evaluated_grid(const PixelRect& region, int stride)
{
    return {(region.width() + stride - 1) / stride, (region.height() + stride - 1) / stride};
}

/// pi = 1 - 1 / (exp(phi * xi) + 1): close to 1 inside (phi < 0), 0.5 on the surface.
inline double projection_value(double phi, double xi_sharp)
{
    return 1.0 - 1.0 / (std::exp(phi * xi_sharp) + 1.0);
}

/// Points at distances ray_step, 2 ray_step, ... <= ray_max along the unit ray through a
/// pixel, in camera coordinates.
inline std::vector<Vec3> ray_points(const CameraModel& cam, const Vec2& pixel, const RenderConfig& cfg)
{
    cfg.validate();
    const Vec3 dir = pixel_ray(cam, pixel.x(), pixel.y());
    const int n = cfg.sample_count();
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        pts.push_back(dir * (k * cfg.ray_step));
    }
    return pts;
}

namespace detail {

/// Parameter interval where origin + s dir lies inside the box [lo, hi].
inline bool ray_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi, double& s0, double& s1)
{
    s0 = -std::numeric_limits<double>::infinity();
    s1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-15) {
            if (origin[a] < lo[a] || origin[a] > hi[a]) {
                return false;
            }
            continue;
        }
        double t0 = (lo[a] - origin[a]) / dir[a];
        double t1 = (hi[a] - origin[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        s0 = std::max(s0, t0);
        s1 = std::min(s1, t1);
    }
    return s0 <= s1;
}

} // namespace detail

/// Minimum along one ray: the best coarse sample, then the fine lattice (spacing
/// ray_step / refine) spanning its two neighbours. The fine lattice is anchored at the
/// ray origin, so the value is continuous when the best coarse sample switches.
/// `best_s` receives the distance of the minimizing sample (0 when nothing was sampled).
inline double ray_min_phi(const ShapeManifold& m, const ShapeWeights& z, const Vec3& origin_obj,
                          const Vec3& dir_obj, const RenderConfig& cfg, double* best_s = nullptr)
{
    const double delta = m.truncation();
    const int n = cfg.sample_count();
    int k_lo = 1, k_hi = n;
    if (cfg.cull) {
        double s0 = 0.0, s1 = 0.0;
        if (!detail::ray_box(origin_obj, dir_obj, m.geometry().lo, m.geometry().hi, s0, s1)) {
            if (best_s) *best_s = 0.0;
            return delta;
        }
        k_lo = std::max(k_lo, static_cast<int>(std::ceil(s0 / cfg.ray_step)));
        k_hi = std::min(k_hi, static_cast<int>(std::floor(s1 / cfg.ray_step)));
    }
    double best = delta;
    int best_k = -1;
    for (int k = k_lo; k <= k_hi; ++k) {
        const double s = k * cfg.ray_step;
        const double v = m.evaluate_clamped(z, origin_obj + s * dir_obj);
        if (v < best) {
            best = v;
            best_k = k;
        }
    }
    if (best_k < 0) {
        if (best_s) *best_s = 0.0;
        return delta;
    }
    double arg = best_k * cfg.ray_step;
    if (cfg.refine > 1) {
        const double h = cfg.ray_step / cfg.refine;
        const double s_min = cfg.ray_step, s_max = n * cfg.ray_step;
        const int base = (best_k - 1) * cfg.refine;
        for (int j = 1; j < 2 * cfg.refine; ++j) {
            if (j == cfg.refine) {
                continue;
            }
            const double s = (base + j) * h;
            if (s < s_min - 1e-12 || s > s_max + 1e-12) {
                continue;
            }
            const double v = m.evaluate_clamped(z, origin_obj + s * dir_obj);
            if (v < best) {
                best = v;
                arg = s;
            }
        }
    }
    if (best_s) *best_s = arg;
    return best;
}

/// Object-frame ray through a pixel for an object at `pose` (ego frame).
struct ObjectRay
{
    Vec3 origin;
    Vec3 dir;
};

inline ObjectRay object_ray(const CameraModel& cam, const Pose& pose, double u, double v)
{
    const Mat3 r_inv = pose.rotation().transpose();
    const Vec3 dir_ego = cam.rotation.transpose() * pixel_ray(cam, u, v);
    return {r_inv * (cam.center_ego() - pose.t), r_inv * dir_ego};
}

/**
 * Silhouette of the decoded shape at `pose`, evaluated every `downsample` pixels of the
 * region starting at its top-left corner. Per pixel the minimum TSDF value along the
 * camera ray goes through the sigmoid projection.
 */
inline SilhouetteImage render_silhouette(const ShapeManifold& m, const ShapeWeights& z_in, const Pose& pose_in,
                                         const CameraModel& cam, const PixelRect& region, const RenderConfig& cfg)
{
    cfg.validate();
    if (region.empty()) {
        throw ConfigError("render region is empty");
    }
    if (region.u0 < 0 || region.v0 < 0 || region.u1 > cam.width || region.v1 > cam.height) {
        throw ConfigError("render region exceeds the image");
    }
    const ShapeWeights z = ShapeManifold::clamp_weights(z_in);
    const Pose pose{pose_in.t, pose_in.q.normalized()};
    SilhouetteImage img;
    img.region = region;
    img.stride = cfg.downsample;
    std::tie(img.cols, img.rows) = evaluated_grid(region, cfg.downsample);
    img.pi_floor = projection_value(m.truncation(), cfg.xi_sharp);
    img.values.resize(static_cast<std::size_t>(img.cols * img.rows));

    const Mat3 r_inv = pose.rotation().transpose();
    const Vec3 origin = r_inv * (cam.center_ego() - pose.t);
    const Mat3 cam_to_obj = r_inv * cam.rotation.transpose();
    for (int row = 0; row < img.rows; ++row) {
        for (int col = 0; col < img.cols; ++col) {
            const Vec3 dir = cam_to_obj * pixel_ray(cam, img.pixel_u(col), img.pixel_v(row));
            const double phi = ray_min_phi(m, z, origin, dir, cfg);
            img.values[static_cast<std::size_t>(row * img.cols + col)] = projection_value(phi, cfg.xi_sharp);
        }
    }
    return img;
}

/// 8-bit binary PGM of a silhouette, one pixel per evaluated sample, value round(255 pi).
inline void write_silhouette_pgm(const std::string& path, const SilhouetteImage& img)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open " + path + " for writing");
    }
    os << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
    for (double v : img.values) {
        const long q = std::lround(255.0 * v);
        os.put(static_cast<char>(static_cast<unsigned char>(std::clamp<long>(q, 0, 255))));
    }
}

} // namespace plausi
