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

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace plausi {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Hamilton quaternion, scalar first.
struct Quat
{
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quat identity() { return {}; }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    static Quat from_axis_angle(const Vec3& axis, double angle)
    {
        const double n = axis.norm();
        if (n == 0.0) {
            throw DegenerateInputError("rotation axis has zero length");
        }
        const double s = std::sin(0.5 * angle) / n;
        return {std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s};
    }

    static Quat from_yaw(double yaw) { return from_axis_angle(Vec3::UnitZ(), yaw); }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat normalized() const
    {
        const double n = norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw DegenerateInputError("quaternion has zero or non-finite norm");
        }
        return {w / n, x / n, y / n, z / n};
    }

    Quat conjugate() const { return {w, -x, -y, -z}; }

    friend Quat operator*(const Quat& a, const Quat& b)
    {
        return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
    }

    friend bool operator==(const Quat&, const Quat&) = default;
};

/// Rotation matrix of a quaternion. The input is renormalized first.
inline Mat3 quat_to_matrix(const Quat& q_in)
{
    const Quat q = q_in.normalized();
    const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
    const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
    const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
    Mat3 r;
    r << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
         2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
         2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
    return r;
}

/// Quaternion of a proper rotation matrix (Shepperd's method), w >= 0.
inline Quat matrix_to_quat(const Mat3& r)
{
    const double tr = r.trace();
    Quat q;
    if (tr > 0.0) {
        const double s = 2.0 * std::sqrt(1.0 + tr);
        q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
        q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
    } else if (r(1, 1) > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
        q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
        q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
    }
    if (q.w < 0.0) {
        q = {-q.w, -q.x, -q.y, -q.z};
    }
    return q.normalized();
}

/// Rigid object-to-ego transform: p_ego = R(q) p_obj + t.
struct Pose
{
    Vec3 t = Vec3::Zero();
    Quat q;

    Mat3 rotation() const { return quat_to_matrix(q); }
};

inline Vec3 transform_point(const Pose& pose, const Vec3& p_obj)
{
    return pose.rotation() * p_obj + pose.t;
}

inline Vec3 inverse_transform_point(const Pose& pose, const Vec3& p_ego)
{
    return pose.rotation().transpose() * (p_ego - pose.t);
}

inline constexpr std::size_t kNumShapeWeights = 5;
using ShapeWeights = std::array<double, kNumShapeWeights>;

/// Optimization state [t_x, t_y, t_z, q_w, q_x, q_y, q_z, z_0 .. z_4].
struct StateVector
{
    static constexpr std::size_t kSize = 12;
    std::array<double, kSize> xi{};

    static StateVector pack(const Pose& pose, const ShapeWeights& z)
    {
        StateVector s;
        s.xi = {pose.t.x(), pose.t.y(), pose.t.z(), pose.q.w, pose.q.x, pose.q.y, pose.q.z,
                z[0], z[1], z[2], z[3], z[4]};
        return s;
    }

    static StateVector from_span(const double* values)
    {
        StateVector s;
        std::copy(values, values + kSize, s.xi.begin());
        return s;
    }

    /// Pose exactly as stored; the quaternion is not touched.
    Pose pose() const { return {Vec3(xi[0], xi[1], xi[2]), Quat{xi[3], xi[4], xi[5], xi[6]}}; }

    ShapeWeights shape() const { return {xi[7], xi[8], xi[9], xi[10], xi[11]}; }

    /// Copy with a unit quaternion block; translation and shape are untouched.
    StateVector normalized() const
    {
        StateVector s = *this;
        const Quat q = pose().q.normalized();
        s.xi[3] = q.w;
        s.xi[4] = q.x;
        s.xi[5] = q.y;
        s.xi[6] = q.z;
        return s;
    }

    friend bool operator==(const StateVector&, const StateVector&) = default;
};

/// Oriented 3D box. `dims` is (length, width, height) along the object x, y, z axes.
struct BoundingBox3D
{
    Vec3 center = Vec3::Zero();
    Vec3 dims = Vec3::Ones();
    Quat orientation;

    void validate() const
    {
        if (!(dims.x() > 0.0 && dims.y() > 0.0 && dims.z() > 0.0)) {
            throw ConfigError("bounding box dimensions must be positive");
        }
    }

    double volume() const { return dims.prod(); }

    Pose pose() const { return {center, orientation}; }

    /// True when `p_ego` lies inside the box scaled by `margin` about its center.
    bool contains(const Vec3& p_ego, double margin = 1.0) const
    {
        const Vec3 local = quat_to_matrix(orientation).transpose() * (p_ego - center);
        const Vec3 half = 0.5 * margin * dims;
        return std::abs(local.x()) <= half.x() && std::abs(local.y()) <= half.y() &&
               std::abs(local.z()) <= half.z();
    }
};

inline std::array<Vec3, 8> box_corners(const BoundingBox3D& box)
{
    box.validate();
    const Mat3 r = quat_to_matrix(box.orientation);
    const Vec3 half = 0.5 * box.dims;
    std::array<Vec3, 8> corners;
    for (int i = 0; i < 8; ++i) {
        const Vec3 sign((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
        corners[static_cast<std::size_t>(i)] = box.center + r * sign.cwiseProduct(half);
    }
    return corners;
}

/// Pinhole camera. Camera frame: x right, y down, z along the optical axis.
struct CameraModel
{
    double fx = 500.0;
    double fy = 500.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;
    /// Ego-to-camera rigid transform: p_cam = rotation * p_ego + translation.
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    /// Camera at `position` (ego frame) looking along ego +x with ego +z up.
    static CameraModel forward_looking(double fx, double fy, double cx, double cy, int width,
                                       int height, const Vec3& position)
    {
        CameraModel cam;
        cam.fx = fx;
        cam.fy = fy;
        cam.cx = cx;
        cam.cy = cy;
        cam.width = width;
        cam.height = height;
        // rows are the camera axes expressed in ego coordinates
        cam.rotation << 0.0, -1.0, 0.0,
                        0.0, 0.0, -1.0,
                        1.0, 0.0, 0.0;
        cam.translation = -cam.rotation * position;
        cam.validate();
        return cam;
    }

    void validate() const
    {
        if (!(fx > 0.0 && fy > 0.0)) {
            throw ConfigError("focal lengths must be positive");
        }
        if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height)) {
            throw ConfigError("principal point must lie inside the image");
        }
    }

    Vec3 to_camera(const Vec3& p_ego) const { return rotation * p_ego + translation; }
    Vec3 to_ego(const Vec3& p_cam) const { return rotation.transpose() * (p_cam - translation); }
    Vec3 center_ego() const { return -rotation.transpose() * translation; }
};

inline Vec2 project_pixel(const CameraModel& cam, const Vec3& p_cam)
{
    if (!(p_cam.z() > 1e-6)) {
        throw BehindCameraError("point is behind the camera");
    }
    return {cam.fx * p_cam.x() / p_cam.z() + cam.cx, cam.fy * p_cam.y() / p_cam.z() + cam.cy};
}

/// Unit ray direction (camera frame) through a continuous pixel coordinate.
inline Vec3 pixel_ray(const CameraModel& cam, double u, double v)
{
    return Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0).normalized();
}

/// Axis-aligned pixel rectangle [u0, u1) x [v0, v1).
struct PixelRect
{
    int u0 = 0;
    int v0 = 0;
    int u1 = 0;
    int v1 = 0;

    int width() const { return std::max(0, u1 - u0); }
    int height() const { return std::max(0, v1 - v0); }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool empty() const { return width() == 0 || height() == 0; }

    PixelRect intersect(const PixelRect& o) const
    {
        return {std::max(u0, o.u0), std::max(v0, o.v0), std::min(u1, o.u1), std::min(v1, o.v1)};
    }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

inline double rect_iou(const PixelRect& a, const PixelRect& b)
{
    const PixelRect i = a.intersect(b);
    const double inter = static_cast<double>(i.area());
    const double uni = static_cast<double>(a.area() + b.area()) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Pixel bounds of the projected box corners, clipped to the image. Corners behind the
/// camera are ignored; returns nullopt when every corner is behind it.
inline std::optional<PixelRect> projected_box_rect(const CameraModel& cam, const BoundingBox3D& box)
{
    double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
    bool any = false;
    for (const Vec3& c : box_corners(box)) {
        const Vec3 pc = cam.to_camera(c);
        if (!(pc.z() > 1e-6)) {
            continue;
        }
        const Vec2 uv = project_pixel(cam, pc);
        umin = std::min(umin, uv.x());
        umax = std::max(umax, uv.x());
        vmin = std::min(vmin, uv.y());
        vmax = std::max(vmax, uv.y());
        any = true;
    }
    if (!any) {
        return std::nullopt;
    }
    const PixelRect raw{static_cast<int>(std::floor(umin)), static_cast<int>(std::floor(vmin)),
                        static_cast<int>(std::floor(umax)) + 1,
                        static_cast<int>(std::floor(vmax)) + 1};
    return raw.intersect({0, 0, cam.width, cam.height});
}

/// Rectangle scaled by `factor` about its center, clipped to the image.
inline PixelRect dilate_rect(const PixelRect& r, double factor, int width, int height)
{
    const double cu = 0.5 * (r.u0 + r.u1), cv = 0.5 * (r.v0 + r.v1);
    const double hw = 0.5 * factor * r.width(), hh = 0.5 * factor * r.height();
    const PixelRect d{static_cast<int>(std::floor(cu - hw)), static_cast<int>(std::floor(cv - hh)),
                      static_cast<int>(std::ceil(cu + hw)), static_cast<int>(std::ceil(cv + hh))};
    return d.intersect({0, 0, width, height});
}

namespace detail {

inline double polygon_area(const std::vector<Vec2>& poly)
{
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

// Sutherland-Hodgman clip of `subject` against convex counter-clockwise `clip`.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::vector<Vec2>& clip)
{
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2 a = clip[e];
        const Vec2 b = clip[(e + 1) % clip.size()];
        const auto side = [&](const Vec2& p) {
            return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        };
        std::vector<Vec2> out;
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Vec2 p = subject[i];
            const Vec2 q = subject[(i + 1) % subject.size()];
            const double sp = side(p), sq = side(q);
            if (sp >= 0.0) {
                out.push_back(p);
            }
            if ((sp >= 0.0) != (sq >= 0.0)) {
                out.push_back(p + (q - p) * (sp / (sp - sq)));
            }
        }
        subject = std::move(out);
    }
    return subject;
}

} // namespace detail

/// 3D intersection-over-union of two oriented boxes. Exact when both boxes share the
/// same up axis (footprint polygon clipping times vertical overlap); otherwise estimated
/// on a deterministic 32^3 lattice over the first box.
inline double box_iou(const BoundingBox3D& a, const BoundingBox3D& b)
{
    const Mat3 ra = quat_to_matrix(a.orientation);
    const Mat3 rb = quat_to_matrix(b.orientation);
    const Vec3 up = ra.col(2);
    if (up.dot(rb.col(2)) > 1.0 - 1e-12) {
        // Work in a's frame; b's footprint is then a rotated rectangle in the xy plane.
        const Mat3 rel = ra.transpose() * rb;
        const Vec3 off = ra.transpose() * (b.center - a.center);
        const auto footprint = [](const Vec3& c, const Mat3& r, const Vec3& d) {
            std::vector<Vec2> poly;
            const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
            for (int i = 0; i < 4; ++i) {
                const Vec3 p = c + r * Vec3(sx[i] * 0.5 * d.x(), sy[i] * 0.5 * d.y(), 0.0);
                poly.emplace_back(p.x(), p.y());
            }
            return poly;
        };
        const auto pa = footprint(Vec3::Zero(), Mat3::Identity(), a.dims);
        const auto pb = footprint(off, rel, b.dims);
        const double inter_area = std::abs(detail::polygon_area(detail::clip_convex(pb, pa)));
        const double z0 = std::max(-0.5 * a.dims.z(), off.z() - 0.5 * b.dims.z());
        const double z1 = std::min(0.5 * a.dims.z(), off.z() + 0.5 * b.dims.z());
        const double inter = inter_area * std::max(0.0, z1 - z0);
        const double uni = a.volume() + b.volume() - inter;
        return uni > 0.0 ? inter / uni : 0.0;
    }
    constexpr int n = 32;
    int inside = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                const Vec3 local(((i + 0.5) / n - 0.5) * a.dims.x(), ((j + 0.5) / n - 0.5) * a.dims.y(),
                                 ((k + 0.5) / n - 0.5) * a.dims.z());
                if (b.contains(a.center + ra * local)) {
                    ++inside;
                }
            }
        }
    }
    const double inter = a.volume() * inside / static_cast<double>(n * n * n);
    const double uni = a.volume() + b.volume() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

} // namespace plausi
