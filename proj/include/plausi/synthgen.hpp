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
#include "plausi/pipeline.hpp"
#include "plausi/rng.hpp"
#include "plausi/shape_family.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace plausi {

struct LidarConfig
{
    Vec3 origin{0.0, 0.0, 1.8};
    int beams = 32;
    double elevation_min_deg = -25.0;
    double elevation_max_deg = 5.0;
    double azimuth_res_deg = 0.4;
    double range_noise = 0.02;
    double max_range = 60.0;
    double tolerance = 1e-4;
    int max_steps = 256;

    void validate() const
    {
        if (beams < 1 || !(azimuth_res_deg > 0.0) || !(max_range > 0.0) || !(tolerance > 0.0) ||
            range_noise < 0.0 || elevation_max_deg < elevation_min_deg || max_steps < 1) {
            throw ConfigError("invalid lidar configuration");
        }
    }

    std::vector<double> elevations_deg() const
    {
        std::vector<double> e(static_cast<std::size_t>(beams));
        for (int i = 0; i < beams; ++i) {
            e[static_cast<std::size_t>(i)] =
                beams == 1 ? elevation_min_deg
                           : elevation_min_deg + (elevation_max_deg - elevation_min_deg) * i / (beams - 1);
        }
        return e;
    }

    int azimuth_count() const { return static_cast<int>(std::lround(360.0 / azimuth_res_deg)); }
};

/// A car from the analytic family or a box truck, resting in `box`.
struct SceneObject
{
    enum class Kind { Car, Truck };
    Kind kind = Kind::Car;
    ShapeFamilyParams car;
    TruckParams truck;
    BoundingBox3D box;

    Vec3 dims() const { return kind == Kind::Car ? car.dims() : truck.dims(); }

    double sdf_object(const Vec3& p) const { return kind == Kind::Car ? car_sdf(car, p) : truck_sdf(truck, p); }

    double bounding_radius() const { return 0.5 * dims().norm(); }
};

/// Box of `dims` and heading `yaw` standing on the plane below ground point (x, y):
/// its up axis is the plane normal and its bottom face touches the plane.
inline BoundingBox3D box_on_plane(const GroundPlane& g, double x, double y, double yaw, const Vec3& dims)
{
    const Vec3 n = g.normal();
    const Vec3 axis = Vec3::UnitZ().cross(n);
    const Quat tilt = axis.norm() < 1e-15 ? Quat::identity()
                                          : Quat::from_axis_angle(axis, std::acos(std::clamp(n.z(), -1.0, 1.0)));
    BoundingBox3D b;
    b.dims = dims;
    b.orientation = (tilt * Quat::from_yaw(yaw)).normalized();
    b.center = Vec3(x, y, ground_height(g, x, y)) + 0.5 * dims.z() * n;
    return b;
}

namespace detail {

/// First hit of the ray with one object by sphere tracing inside its bounding sphere.
inline double trace_object(const SceneObject& obj, const Vec3& origin, const Vec3& dir, double t_max, double tol,
                           int max_steps)
{
    const Vec3 oc = origin - obj.box.center;
    const double r = obj.bounding_radius();
    const double b = oc.dot(dir);
    const double disc = b * b - (oc.squaredNorm() - r * r);
    if (disc < 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double sq = std::sqrt(disc);
    double t = std::max(0.0, -b - sq);
    const double t_end = std::min(t_max, -b + sq);
    const Mat3 r_inv = quat_to_matrix(obj.box.orientation).transpose();
    const Vec3 o_obj = r_inv * oc, d_obj = r_inv * dir;
    for (int i = 0; i < max_steps && t <= t_end; ++i) {
        const double d = obj.sdf_object(o_obj + t * d_obj);
        if (d < tol) {
            return t;
        }
        t += d;
    }
    return std::numeric_limits<double>::infinity();
}

} // namespace detail

/// Ray hit against the ground and the objects; id -1 is the ground, -2 a miss.
struct RayHit
{
    double t = std::numeric_limits<double>::infinity();
    int id = -2;
};

inline RayHit cast_ray(const GroundPlane* ground, std::span<const SceneObject> objects, const Vec3& origin,
                       const Vec3& dir, double t_max, double tol, int max_steps)
{
    RayHit hit;
    if (ground) {
        // the half-space distance is exact, so its trace collapses to the intersection
        const double nd = ground->normal().dot(dir);
        if (nd < 0.0) {
            const double t = -ground->signed_distance(origin) / nd;
            if (t >= 0.0 && t <= t_max) {
                hit = {t, -1};
            }
        }
    }
    for (std::size_t k = 0; k < objects.size(); ++k) {
        const double t = detail::trace_object(objects[k], origin, dir, std::min(t_max, hit.t), tol, max_steps);
        if (t < hit.t) {
            hit = {t, static_cast<int>(k)};
        }
    }
    return hit;
}

struct LidarScan
{
    std::vector<Vec3> points;
    std::vector<int> ids; ///< per point: object index or -1 for ground
};

/// Rays over an elevation x azimuth grid; point order is (elevation, azimuth).
inline LidarScan simulate_lidar(const GroundPlane* ground, std::span<const SceneObject> objects,
                                const LidarConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    Rng rng(seed);
    LidarScan scan;
    const int n_az = cfg.azimuth_count();
    for (double elev_deg : cfg.elevations_deg()) {
        const double el = deg2rad(elev_deg);
        for (int a = 0; a < n_az; ++a) {
            const double az = deg2rad(a * cfg.azimuth_res_deg);
            const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
            const RayHit hit = cast_ray(ground, objects, cfg.origin, dir, cfg.max_range, cfg.tolerance, cfg.max_steps);
            if (hit.id == -2) {
                continue;
            }
            const double range = cfg.range_noise > 0.0 ? hit.t + rng.normal(0.0, cfg.range_noise) : hit.t;
            scan.points.push_back(cfg.origin + range * dir);
            scan.ids.push_back(hit.id);
        }
    }
    return scan;
}

/// Per-object silhouettes through every pixel center. Masks are unoccluded unless
/// `visible_only`. The optional outputs receive the unoccluded and first-hit pixel
/// counts of each object.
inline std::vector<BinaryMask> render_instance_masks(std::span<const SceneObject> objects, const CameraModel& cam,
                                                     double tol, int max_steps, bool visible_only = false,
                                                     std::vector<long long>* full_area = nullptr,
                                                     std::vector<long long>* visible_area = nullptr)
{
    std::vector<BinaryMask> masks(objects.size(), BinaryMask(cam.width, cam.height));
    if (full_area) full_area->assign(objects.size(), 0);
    if (visible_area) visible_area->assign(objects.size(), 0);
    const Vec3 origin = cam.center_ego();
    const Mat3 to_ego = cam.rotation.transpose();
    const bool need_first = visible_only || visible_area;
    for (std::size_t k = 0; k < objects.size(); ++k) {
        const auto rect = projected_box_rect(cam, objects[k].box);
        if (!rect || rect->empty()) {
            continue;
        }
        for (int v = rect->v0; v < rect->v1; ++v) {
            for (int u = rect->u0; u < rect->u1; ++u) {
                const Vec3 dir = to_ego * pixel_ray(cam, u, v);
                const double t = detail::trace_object(objects[k], origin, dir, 1e9, tol, max_steps);
                if (!std::isfinite(t)) {
                    continue;
                }
                if (full_area) ++(*full_area)[k];
                bool first = true;
                if (need_first) {
                    first = cast_ray(nullptr, objects, origin, dir, 1e9, tol, max_steps).id == static_cast<int>(k);
                    if (first && visible_area) ++(*visible_area)[k];
                }
                masks[k].set(u, v, !visible_only || first);
            }
        }
    }
    return masks;
}

/// Grows (k > 0) or shrinks (k < 0) a mask by |k| pixels with a square structuring element.
inline BinaryMask morph_mask(const BinaryMask& m, int k)
{
    if (k == 0) {
        return m;
    }
    const bool grow = k > 0;
    const int r = std::abs(k);
    BinaryMask out(m.width, m.height);
    for (int v = 0; v < m.height; ++v) {
        for (int u = 0; u < m.width; ++u) {
            bool val = !grow;
            for (int dv = -r; dv <= r && val != grow; ++dv) {
                for (int du = -r; du <= r; ++du) {
                    const int uu = u + du, vv = v + dv;
                    const bool on = uu >= 0 && vv >= 0 && uu < m.width && vv < m.height && m.at(uu, vv);
                    if (on == grow) {
                        val = grow;
                        break;
                    }
                }
            }
            out.set(u, v, val);
        }
    }
    return out;
}

struct ObjectPlacement
{
    double x = 10.0;
    double y = 0.0;
    double yaw = 0.0;
    SceneObject::Kind kind = SceneObject::Kind::Car;
    ShapeFamilyParams car;
    TruckParams truck;
};

struct SceneSpec
{
    int n_cars = 3;
    int n_trucks = 0;
    double pitch_deg = 0.0;
    double roll_deg = 0.0;
    /// When non-empty, used verbatim instead of random placement.
    std::vector<ObjectPlacement> placements;
    LidarConfig lidar;
    CameraModel camera = default_camera();
    std::uint64_t seed = 0;

    // random placement region (ego x range, fraction of the horizontal field of view)
    double x_min = 6.0;
    double x_max = 26.0;
    double fov_fraction = 0.8;
    double min_visible_fraction = 0.5;

    /// Clip masks to the unoccluded part of each object.
    bool visible_masks = false;
    // mask imperfection (off by default)
    int mask_morph = 0;
    double mask_row_dropout = 0.0;

    static CameraModel default_camera()
    {
        return CameraModel::forward_looking(400.0, 400.0, 320.0, 180.0, 640, 360, Vec3(0.0, 0.0, 1.6));
    }

    void validate() const
    {
        if (n_cars < 0 || n_cars > 6 || n_trucks < 0 || n_cars + n_trucks > 6) {
            throw ConfigError("scene holds 0 to 6 objects");
        }
        if (std::abs(pitch_deg) > 5.0 || std::abs(roll_deg) > 5.0) {
            throw ConfigError("ground pitch and roll are limited to 5 degrees");
        }
        if (!(x_min > 0.0 && x_max > x_min && fov_fraction > 0.0 && fov_fraction <= 1.0)) {
            throw ConfigError("invalid placement region");
        }
        lidar.validate();
        camera.validate();
    }
};

struct GeneratedScene
{
    Scene scene; ///< scene.plane is the true ground
    std::vector<SceneObject> objects;
    std::vector<BoundingBox3D> gt_boxes;
    std::vector<int> point_ids;
};

inline GroundPlane tilted_ground(double pitch_deg, double roll_deg)
{
    const Mat3 r = quat_to_matrix(Quat::from_axis_angle(Vec3::UnitY(), deg2rad(pitch_deg)) *
                                  Quat::from_axis_angle(Vec3::UnitX(), deg2rad(roll_deg)));
    return GroundPlane::through(Vec3::Zero(), r.col(2));
}

namespace detail {

inline ShapeFamilyParams random_car(Rng& rng)
{
    using P = ShapeFamilyParams;
    return {rng.uniform(P::kLengthMin, P::kLengthMax), rng.uniform(P::kWidthMin, P::kWidthMax),
            rng.uniform(P::kHeightMin, P::kHeightMax), rng.uniform(P::kCabinMin, P::kCabinMax),
            rng.uniform(P::kRoundMin, P::kRoundMax)};
}

inline TruckParams random_truck(Rng& rng)
{
    return {rng.uniform(7.0, 10.0), rng.uniform(2.3, 2.6), rng.uniform(2.8, 3.6)};
}

inline std::vector<SceneObject> build_objects(const std::vector<ObjectPlacement>& ps, const GroundPlane& g)
{
    std::vector<SceneObject> objs;
    for (const ObjectPlacement& p : ps) {
        SceneObject o;
        o.kind = p.kind;
        o.car = p.car;
        o.truck = p.truck;
        o.box = box_on_plane(g, p.x, p.y, p.yaw, o.dims());
        objs.push_back(o);
    }
    return objs;
}

inline bool footprints_clear(const std::vector<ObjectPlacement>& ps, std::size_t k, double gap)
{
    const auto radius = [](const ObjectPlacement& p) {
        const Vec3 d = p.kind == SceneObject::Kind::Car ? p.car.dims() : p.truck.dims();
        return 0.5 * std::hypot(d.x(), d.y());
    };
    for (std::size_t j = 0; j < k; ++j) {
        if (std::hypot(ps[k].x - ps[j].x, ps[k].y - ps[j].y) < radius(ps[k]) + radius(ps[j]) + gap) {
            return false;
        }
    }
    return true;
}

} // namespace detail

/// Cloud, masks and boxes of one synthetic frame; a pure function of the spec.
inline GeneratedScene generate_scene(const SceneSpec& spec)
{
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0));
    const GroundPlane ground = tilted_ground(spec.pitch_deg, spec.roll_deg);
    const CameraModel& cam = spec.camera;
    const double half_fov = std::atan2(0.5 * cam.width, cam.fx) * spec.fov_fraction;

    std::vector<ObjectPlacement> placements = spec.placements;
    std::vector<SceneObject> objects;
    std::vector<BinaryMask> masks;
    const int n_objects = spec.n_cars + spec.n_trucks;
    bool ok = !spec.placements.empty() || n_objects == 0;
    if (ok) {
        objects = detail::build_objects(placements, ground);
        masks = render_instance_masks(objects, cam, spec.lidar.tolerance, spec.lidar.max_steps, spec.visible_masks);
    }
    for (int attempt = 0; !ok && attempt < 1000; ++attempt) {
        placements.clear();
        bool placed = true;
        for (int k = 0; k < n_objects && placed; ++k) {
            ObjectPlacement p;
            p.kind = k < spec.n_cars ? SceneObject::Kind::Car : SceneObject::Kind::Truck;
            if (p.kind == SceneObject::Kind::Car) {
                p.car = detail::random_car(rng);
            } else {
                p.truck = detail::random_truck(rng);
            }
            p.x = rng.uniform(spec.x_min, spec.x_max);
            p.y = p.x * std::tan(rng.uniform(-half_fov, half_fov));
            p.yaw = rng.uniform(-kPi, kPi);
            placements.push_back(p);
            placed = detail::footprints_clear(placements, placements.size() - 1, 0.5);
        }
        if (!placed) {
            continue;
        }
        objects = detail::build_objects(placements, ground);
        std::vector<long long> full, visible;
        masks = render_instance_masks(objects, cam, spec.lidar.tolerance, spec.lidar.max_steps, spec.visible_masks,
                                      &full, &visible);
        ok = true;
        for (std::size_t k = 0; k < objects.size() && ok; ++k) {
            ok = full[k] > 0 &&
                 static_cast<double>(visible[k]) >= spec.min_visible_fraction * static_cast<double>(full[k]);
        }
    }
    if (!ok) {
        throw GenerationError("no valid object placement after 1000 attempts");
    }

    for (BinaryMask& m : masks) {
        m = morph_mask(m, spec.mask_morph);
        if (spec.mask_row_dropout > 0.0) {
            for (int v = 0; v < m.height; ++v) {
                if (rng.bernoulli(spec.mask_row_dropout)) {
                    for (int u = 0; u < m.width; ++u) m.set(u, v, false);
                }
            }
        }
    }

    GeneratedScene out;
    LidarScan scan = simulate_lidar(&ground, objects, spec.lidar, derive_seed(spec.seed, 1));
    out.scene.camera = cam;
    out.scene.cloud = std::move(scan.points);
    out.scene.masks = std::move(masks);
    out.scene.plane = ground;
    out.point_ids = std::move(scan.ids);
    out.objects = objects;
    for (const SceneObject& o : objects) {
        out.gt_boxes.push_back(o.box);
    }
    return out;
}

enum class FpMode { Shift, Float, Ghost, Tilt, DimsAbsurd };

inline const char* to_string(FpMode m)
{
    switch (m) {
    case FpMode::Shift: return "shift";
    case FpMode::Float: return "float";
    case FpMode::Ghost: return "ghost";
    case FpMode::Tilt: return "tilt";
    case FpMode::DimsAbsurd: return "dims-absurd";
    }
    return "?";
}

struct PerturbSpec
{
    double tp_sigma_t = 0.15; ///< meters, per axis
    double tp_sigma_yaw_deg = 3.0;
    double shift_min = 2.0, shift_max = 5.0;
    double float_min = 1.0, float_max = 3.0;
    double tilt_min_deg = 30.0, tilt_max_deg = 150.0;
    /// Sampling weights of shift, float, ghost, tilt, dims-absurd.
    std::array<double, 5> fp_weights{0.25, 0.2, 0.25, 0.15, 0.15};
    /// Hypotheses per call; 0 means twice the GT count. Odd counts get the extra TP.
    int count = 0;
    GroundPlane ground;
    // ghost placement region in ego x and |y|
    double ghost_x_min = 6.0, ghost_x_max = 26.0, ghost_y_max = 10.0;

    void validate() const
    {
        if (tp_sigma_t < 0.0 || tp_sigma_yaw_deg < 0.0 || shift_min > shift_max || float_min > float_max ||
            tilt_min_deg > tilt_max_deg || count < 0) {
            throw ConfigError("invalid perturbation spec");
        }
        double sum = 0.0;
        for (double w : fp_weights) {
            if (w < 0.0) throw ConfigError("fp mode weights must be non-negative");
            sum += w;
        }
        if (!(sum > 0.0)) {
            throw ConfigError("fp mode weights sum to zero");
        }
    }
};

struct LabeledHypothesis
{
    Hypothesis hypothesis;
    bool is_tp = false;
    std::string mode; ///< "tp" or the FP mode
    int source_gt = -1;
};

namespace detail {

inline FpMode draw_mode(Rng& rng, const std::array<double, 5>& w)
{
    double sum = 0.0;
    for (double v : w) sum += v;
    double u = rng.uniform() * sum;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (u < w[i]) return static_cast<FpMode>(i);
        u -= w[i];
    }
    return FpMode::DimsAbsurd;
}

inline double max_iou(const BoundingBox3D& b, const std::vector<BoundingBox3D>& gt)
{
    double best = 0.0;
    for (const BoundingBox3D& g : gt) best = std::max(best, box_iou(b, g));
    return best;
}

inline BoundingBox3D scaled_box(const BoundingBox3D& b, double s)
{
    BoundingBox3D c = b;
    c.dims *= s;
    return c;
}

inline bool clear_of(const BoundingBox3D& b, const std::vector<BoundingBox3D>& gt)
{
    for (const BoundingBox3D& g : gt) {
        if (box_iou(scaled_box(b, 1.2), scaled_box(g, 1.2)) > 0.0) return false;
    }
    return true;
}

/// Yaw-only jitter rotates about the box's own up axis.
inline BoundingBox3D jitter_box(const BoundingBox3D& gt, const PerturbSpec& spec, Rng& rng)
{
    BoundingBox3D b = gt;
    b.center += Vec3(rng.normal(0.0, spec.tp_sigma_t), rng.normal(0.0, spec.tp_sigma_t),
                     rng.normal(0.0, spec.tp_sigma_t));
    b.orientation = (gt.orientation * Quat::from_yaw(deg2rad(rng.normal(0.0, spec.tp_sigma_yaw_deg)))).normalized();
    return b;
}

inline double yaw_of(const Quat& q)
{
    const Mat3 r = quat_to_matrix(q);
    return std::atan2(r(1, 0), r(0, 0));
}

inline std::optional<BoundingBox3D> draw_fp(FpMode mode, const std::vector<BoundingBox3D>& gt, std::size_t src,
                                            const PerturbSpec& spec, Rng& rng)
{
    const BoundingBox3D& g = gt[src];
    for (int attempt = 0; attempt < 100; ++attempt) {
        BoundingBox3D b = g;
        switch (mode) {
        case FpMode::Shift: {
            const double s = rng.uniform(spec.shift_min, spec.shift_max) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
            const Vec3 lateral = quat_to_matrix(g.orientation).col(1);
            const Vec3 c = g.center + s * lateral;
            b = box_on_plane(spec.ground, c.x(), c.y(), yaw_of(g.orientation), g.dims);
            if (!clear_of(b, gt)) continue;
            return b;
        }
        case FpMode::Float:
            b.center.z() += rng.uniform(spec.float_min, spec.float_max);
            return b;
        case FpMode::Ghost: {
            const ShapeFamilyParams p = random_car(rng);
            b = box_on_plane(spec.ground, rng.uniform(spec.ghost_x_min, spec.ghost_x_max),
                             rng.uniform(-spec.ghost_y_max, spec.ghost_y_max), rng.uniform(-kPi, kPi), p.dims());
            if (!clear_of(b, gt)) continue;
            return b;
        }
        case FpMode::Tilt: {
            const double axis_angle = rng.uniform(0.0, 2.0 * kPi);
            const Vec3 axis(std::cos(axis_angle), std::sin(axis_angle), 0.0);
            const double tilt = deg2rad(rng.uniform(spec.tilt_min_deg, spec.tilt_max_deg));
            b.orientation = (g.orientation * Quat::from_axis_angle(axis, tilt)).normalized();
            if (max_iou(b, gt) > 0.5) continue;
            return b;
        }
        case FpMode::DimsAbsurd: {
            const TruckParams t = random_truck(rng);
            b = box_on_plane(spec.ground, g.center.x(), g.center.y(), yaw_of(g.orientation), t.dims());
            return b;
        }
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Labeled TP/FP mix over the GT boxes, exactly balanced, shuffled deterministically.
inline std::vector<LabeledHypothesis> perturb_hypotheses(const std::vector<BoundingBox3D>& gt,
                                                         const PerturbSpec& spec, std::uint64_t seed,
                                                         const std::string& id_prefix = "h")
{
    spec.validate();
    if (gt.empty()) {
        throw PreconditionError("perturbation needs at least one GT box");
    }
    Rng rng(seed);
    const int n = spec.count > 0 ? spec.count : 2 * static_cast<int>(gt.size());
    const int n_fp = n / 2, n_tp = n - n_fp;
    std::vector<LabeledHypothesis> out;
    for (int i = 0; i < n_tp; ++i) {
        const std::size_t src = static_cast<std::size_t>(i) % gt.size();
        BoundingBox3D b = gt[src];
        if (spec.tp_sigma_t > 0.0 || spec.tp_sigma_yaw_deg > 0.0) {
            do {
                b = detail::jitter_box(gt[src], spec, rng);
            } while (box_iou(b, gt[src]) <= 0.5);
        }
        out.push_back({{b, 1.0, ""}, true, "tp", static_cast<int>(src)});
    }
    for (int i = 0; i < n_fp; ++i) {
        const std::size_t src = rng.index(gt.size());
        FpMode mode = detail::draw_mode(rng, spec.fp_weights);
        auto b = detail::draw_fp(mode, gt, src, spec, rng);
        if (!b) {
            // crowded scenes: fall back to the mode that never needs free space
            mode = FpMode::Float;
            b = detail::draw_fp(mode, gt, src, spec, rng);
        }
        out.push_back({{*b, 1.0, ""}, false, to_string(mode), static_cast<int>(src)});
    }
    for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[rng.index(i)]);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].hypothesis.id = id_prefix + std::to_string(i);
    }
    return out;
}

} // namespace plausi
