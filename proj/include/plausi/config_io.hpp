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

#include "plausi/dataset.hpp"
#include "plausi/error.hpp"
#include "plausi/ground_plane.hpp"
#include "plausi/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

namespace plausi {

using Json = nlohmann::json;

/// Strict view of a JSON object: every key must be consumed before finish().
class JsonFields
{
public:
    JsonFields(const Json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) {
            throw ConfigError(where_ + ": expected a JSON object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <typename T>
    void get(const std::string& key, T& out)
    {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong value type");
        }
    }

    void get_vec3(const std::string& key, Vec3& out)
    {
        if (!j_.contains(key)) return;
        used_.insert(key);
        out = parse_vec3(j_.at(key), where_ + "." + key);
    }

    /// Sub-object, or nullptr when absent.
    const Json* child(const std::string& key)
    {
        if (!j_.contains(key)) return nullptr;
        used_.insert(key);
        return &j_.at(key);
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) {
                throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
            }
        }
    }

    static double number(const Json& v, const std::string& where)
    {
        if (!v.is_number()) {
            throw ConfigError(where + ": expected a number");
        }
        return v.get<double>();
    }

    static Vec3 parse_vec3(const Json& v, const std::string& where)
    {
        if (!v.is_array() || v.size() != 3) {
            throw ConfigError(where + ": expected an array of 3 numbers");
        }
        Vec3 out;
        for (int i = 0; i < 3; ++i) {
            if (!v[static_cast<std::size_t>(i)].is_number()) {
                throw ConfigError(where + ": expected an array of 3 numbers");
            }
            out[i] = v[static_cast<std::size_t>(i)].get<double>();
        }
        return out;
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> used_;
};

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json to_json(const Quat& q) { return Json::array({q.w, q.x, q.y, q.z}); }

inline Quat quat_from_json(const Json& v, const std::string& where)
{
    if (!v.is_array() || v.size() != 4) {
        throw DataError(where + ": expected [w, x, y, z]");
    }
    try {
        return Quat{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
    } catch (const nlohmann::json::exception&) {
        throw DataError(where + ": quaternion entries must be numbers");
    }
}

inline Json to_json(const BoundingBox3D& b)
{
    return Json{{"center", to_json(b.center)}, {"dims", to_json(b.dims)}, {"orientation", to_json(b.orientation)}};
}

inline BoundingBox3D box_from_json(const Json& j, const std::string& where)
{
    BoundingBox3D b;
    try {
        JsonFields f(j, where);
        f.get_vec3("center", b.center);
        f.get_vec3("dims", b.dims);
        if (const Json* q = f.child("orientation")) b.orientation = quat_from_json(*q, where + ".orientation");
        f.finish();
        b.validate();
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    return b;
}

inline Json to_json(const GroundPlane& g) { return Json{{"a", g.a}, {"b", g.b}, {"c", g.c}, {"d", g.d}}; }

inline GroundPlane plane_from_json(const Json& j, const std::string& where)
{
    GroundPlane g;
    JsonFields f(j, where);
    f.get("a", g.a);
    f.get("b", g.b);
    f.get("c", g.c);
    f.get("d", g.d);
    f.finish();
    return GroundPlane::from_coefficients(g.a, g.b, g.c, g.d);
}

/// Full camera: intrinsics plus the ego-to-camera transform (rotation row-major).
inline Json to_json(const CameraModel& c)
{
    Json rot = Json::array();
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) rot.push_back(c.rotation(r, k));
    }
    return Json{{"fx", c.fx},         {"fy", c.fy},     {"cx", c.cx},
                {"cy", c.cy},         {"width", c.width}, {"height", c.height},
                {"rotation", rot},    {"translation", to_json(c.translation)}};
}

/// Accepts either the full form or {..., "position": [x, y, z]} for a forward-looking camera.
inline CameraModel camera_from_json(const Json& j, const std::string& where)
{
    CameraModel c = SceneSpec::default_camera();
    JsonFields f(j, where);
    f.get("fx", c.fx);
    f.get("fy", c.fy);
    f.get("cx", c.cx);
    f.get("cy", c.cy);
    f.get("width", c.width);
    f.get("height", c.height);
    if (f.has("position")) {
        if (f.has("rotation") || f.has("translation")) {
            throw ConfigError(where + ": position excludes rotation/translation");
        }
        Vec3 pos;
        f.get_vec3("position", pos);
        c = CameraModel::forward_looking(c.fx, c.fy, c.cx, c.cy, c.width, c.height, pos);
    } else {
        if (const Json* r = f.child("rotation")) {
            if (!r->is_array() || r->size() != 9) {
                throw ConfigError(where + ".rotation: expected 9 numbers");
            }
            for (int i = 0; i < 9; ++i) {
                c.rotation(i / 3, i % 3) = (*r)[static_cast<std::size_t>(i)].get<double>();
            }
        }
        f.get_vec3("translation", c.translation);
    }
    f.finish();
    c.validate();
    return c;
}

inline void read_weights(const Json& j, const std::string& where, EnergyWeights& w)
{
    JsonFields f(j, where);
    f.get("sil", w.sil);
    f.get("cd", w.cd);
    f.get("hog", w.hog);
    f.get("rot", w.rot);
    f.get("barrier", w.barrier);
    f.finish();
}

inline Json to_json(const EnergyWeights& w)
{
    return Json{{"sil", w.sil}, {"cd", w.cd}, {"hog", w.hog}, {"rot", w.rot}, {"barrier", w.barrier}};
}

inline const char* to_string(OptimMethod m) { return m == OptimMethod::Bfgs ? "bfgs" : "bounded-lbfgs"; }

inline void read_optimizer(const Json& j, const std::string& where, OptimizerConfig& c)
{
    JsonFields f(j, where);
    if (f.has("method")) {
        std::string m;
        f.get("method", m);
        if (m == "bfgs") {
            c.method = OptimMethod::Bfgs;
        } else if (m == "bounded-lbfgs") {
            c.method = OptimMethod::BoundedLbfgs;
        } else {
            throw ConfigError(where + ".method: expected bfgs or bounded-lbfgs");
        }
    }
    f.get("max_iters", c.max_iters);
    f.get("grad_tol", c.grad_tol);
    f.get("step_tol", c.step_tol);
    f.get("f_tol", c.f_tol);
    f.get("fd_step", c.fd_step);
    f.get("memory", c.memory);
    f.get("initial_step", c.initial_step);
    f.get("armijo", c.armijo);
    f.get("max_backtracks", c.max_backtracks);
    f.finish();
}

inline Json to_json(const OptimizerConfig& c)
{
    return Json{{"method", to_string(c.method)}, {"max_iters", c.max_iters}, {"grad_tol", c.grad_tol},
                {"step_tol", c.step_tol},        {"f_tol", c.f_tol},         {"fd_step", c.fd_step},
                {"memory", c.memory},            {"initial_step", c.initial_step}, {"armijo", c.armijo},
                {"max_backtracks", c.max_backtracks}};
}

inline void read_render(const Json& j, const std::string& where, RenderConfig& r)
{
    JsonFields f(j, where);
    f.get("downsample", r.downsample);
    f.get("ray_step", r.ray_step);
    f.get("ray_max", r.ray_max);
    f.get("xi_sharp", r.xi_sharp);
    f.get("refine", r.refine);
    f.get("cull", r.cull);
    f.finish();
}

inline Json to_json(const RenderConfig& r)
{
    return Json{{"downsample", r.downsample}, {"ray_step", r.ray_step}, {"ray_max", r.ray_max},
                {"xi_sharp", r.xi_sharp},     {"refine", r.refine},     {"cull", r.cull}};
}

/// Everything `verify` needs besides the bundle.
struct VerifyConfig
{
    PipelineConfig pipeline;
    RansacConfig ransac;
    /// Use the stored true plane instead of fitting one.
    bool true_plane = false;
};

/// Applies overrides from a JSON object onto `cfg`; unknown keys are errors.
inline void apply_verify_config(const Json& j, VerifyConfig& cfg)
{
    PipelineConfig& p = cfg.pipeline;
    JsonFields f(j, "config");
    f.get("gate_x", p.gate_x);
    f.get("gate_y", p.gate_y);
    f.get("min_points", p.min_points);
    f.get("outlier_radius", p.outlier_radius);
    f.get("min_neighbors", p.min_neighbors);
    f.get_vec3("dims_lo", p.dims_lo);
    f.get_vec3("dims_hi", p.dims_hi);
    f.get("prior_gate", p.prior_gate);
    f.get("kappa", p.kappa);
    f.get("mask_iou_min", p.mask_iou_min);
    f.get("grad_change_rel", p.grad_change_rel);
    f.get("grad_change_abs", p.grad_change_abs);
    if (const Json* w = f.child("weights_c1")) read_weights(*w, "config.weights_c1", p.weights_c1);
    if (const Json* w = f.child("weights_c2")) read_weights(*w, "config.weights_c2", p.weights_c2);
    f.get("crop_margin", p.crop_margin);
    f.get("ground_clearance", p.ground_clearance);
    f.get("region_dilation", p.region_dilation);
    f.get("mask_floor", p.mask_floor);
    f.get("huber_eps", p.huber_eps);
    if (const Json* r = f.child("render")) read_render(*r, "config.render", p.render);
    if (const Json* s = f.child("step1")) read_optimizer(*s, "config.step1", p.step1);
    if (const Json* s = f.child("step2")) read_optimizer(*s, "config.step2", p.step2);
    if (const Json* r = f.child("ransac")) {
        JsonFields rf(*r, "config.ransac");
        rf.get("iters", cfg.ransac.iters);
        rf.get("inlier_tol", cfg.ransac.inlier_tol);
        rf.get("min_inliers", cfg.ransac.min_inliers);
        if (const Json* z = rf.child("max_candidate_z")) {
            // null means no height limit
            cfg.ransac.max_candidate_z =
                z->is_null() ? std::numeric_limits<double>::infinity() : JsonFields::number(*z, "config.ransac.max_candidate_z");
        }
        rf.finish();
    }
    f.get("true_plane", cfg.true_plane);
    f.finish();
    p.validate();
}

inline Json to_json(const VerifyConfig& cfg)
{
    const PipelineConfig& p = cfg.pipeline;
    return Json{{"gate_x", p.gate_x},
                {"gate_y", p.gate_y},
                {"min_points", p.min_points},
                {"outlier_radius", p.outlier_radius},
                {"min_neighbors", p.min_neighbors},
                {"dims_lo", to_json(p.dims_lo)},
                {"dims_hi", to_json(p.dims_hi)},
                {"prior_gate", p.prior_gate},
                {"kappa", p.kappa},
                {"mask_iou_min", p.mask_iou_min},
                {"grad_change_rel", p.grad_change_rel},
                {"grad_change_abs", p.grad_change_abs},
                {"weights_c1", to_json(p.weights_c1)},
                {"weights_c2", to_json(p.weights_c2)},
                {"crop_margin", p.crop_margin},
                {"ground_clearance", p.ground_clearance},
                {"region_dilation", p.region_dilation},
                {"mask_floor", p.mask_floor},
                {"huber_eps", p.huber_eps},
                {"render", to_json(p.render)},
                {"step1", to_json(p.step1)},
                {"step2", to_json(p.step2)},
                {"ransac",
                 {{"iters", cfg.ransac.iters},
                  {"inlier_tol", cfg.ransac.inlier_tol},
                  {"min_inliers", cfg.ransac.min_inliers},
                  {"max_candidate_z", std::isfinite(cfg.ransac.max_candidate_z) ? Json(cfg.ransac.max_candidate_z) : Json()}}},
                {"true_plane", cfg.true_plane}};
}

inline DatasetSpec dataset_spec_from_json(const Json& j)
{
    DatasetSpec s;
    JsonFields f(j, "spec");
    f.get("scenes", s.scenes);
    f.get("cars_min", s.cars_min);
    f.get("cars_max", s.cars_max);
    f.get("trucks", s.trucks);
    f.get("max_slope_deg", s.max_slope_deg);
    f.get("hypotheses_per_scene", s.hypotheses_per_scene);
    f.get("truck_hypotheses", s.truck_hypotheses);
    f.get("visible_masks", s.visible_masks);
    f.get("mask_morph", s.mask_morph);
    f.get("mask_row_dropout", s.mask_row_dropout);
    if (const Json* c = f.child("camera")) s.camera = camera_from_json(*c, "spec.camera");
    if (const Json* l = f.child("lidar")) {
        JsonFields lf(*l, "spec.lidar");
        lf.get_vec3("origin", s.lidar.origin);
        lf.get("beams", s.lidar.beams);
        lf.get("elevation_min_deg", s.lidar.elevation_min_deg);
        lf.get("elevation_max_deg", s.lidar.elevation_max_deg);
        lf.get("azimuth_res_deg", s.lidar.azimuth_res_deg);
        lf.get("range_noise", s.lidar.range_noise);
        lf.get("max_range", s.lidar.max_range);
        lf.finish();
    }
    if (const Json* p = f.child("perturb")) {
        JsonFields pf(*p, "spec.perturb");
        PerturbSpec& ps = s.perturb;
        pf.get("tp_sigma_t", ps.tp_sigma_t);
        pf.get("tp_sigma_yaw_deg", ps.tp_sigma_yaw_deg);
        pf.get("shift_min", ps.shift_min);
        pf.get("shift_max", ps.shift_max);
        pf.get("float_min", ps.float_min);
        pf.get("float_max", ps.float_max);
        pf.get("tilt_min_deg", ps.tilt_min_deg);
        pf.get("tilt_max_deg", ps.tilt_max_deg);
        if (const Json* w = pf.child("fp_weights")) {
            JsonFields wf(*w, "spec.perturb.fp_weights");
            for (int m = 0; m < 5; ++m) {
                wf.get(to_string(static_cast<FpMode>(m)), ps.fp_weights[static_cast<std::size_t>(m)]);
            }
            wf.finish();
        }
        pf.get("ghost_x_min", ps.ghost_x_min);
        pf.get("ghost_x_max", ps.ghost_x_max);
        pf.get("ghost_y_max", ps.ghost_y_max);
        pf.finish();
    }
    f.finish();
    s.validate();
    return s;
}

inline Json to_json(const DatasetSpec& s)
{
    Json w;
    for (int m = 0; m < 5; ++m) {
        w[to_string(static_cast<FpMode>(m))] = s.perturb.fp_weights[static_cast<std::size_t>(m)];
    }
    const PerturbSpec& p = s.perturb;
    return Json{{"scenes", s.scenes},
                {"cars_min", s.cars_min},
                {"cars_max", s.cars_max},
                {"trucks", s.trucks},
                {"max_slope_deg", s.max_slope_deg},
                {"hypotheses_per_scene", s.hypotheses_per_scene},
                {"truck_hypotheses", s.truck_hypotheses},
                {"visible_masks", s.visible_masks},
                {"mask_morph", s.mask_morph},
                {"mask_row_dropout", s.mask_row_dropout},
                {"camera", to_json(s.camera)},
                {"lidar",
                 {{"origin", to_json(s.lidar.origin)},
                  {"beams", s.lidar.beams},
                  {"elevation_min_deg", s.lidar.elevation_min_deg},
                  {"elevation_max_deg", s.lidar.elevation_max_deg},
                  {"azimuth_res_deg", s.lidar.azimuth_res_deg},
                  {"range_noise", s.lidar.range_noise},
                  {"max_range", s.lidar.max_range}}},
                {"perturb",
                 {{"tp_sigma_t", p.tp_sigma_t},
                  {"tp_sigma_yaw_deg", p.tp_sigma_yaw_deg},
                  {"shift_min", p.shift_min},
                  {"shift_max", p.shift_max},
                  {"float_min", p.float_min},
                  {"float_max", p.float_max},
                  {"tilt_min_deg", p.tilt_min_deg},
                  {"tilt_max_deg", p.tilt_max_deg},
                  {"fp_weights", w},
                  {"ghost_x_min", p.ghost_x_min},
                  {"ghost_x_max", p.ghost_x_max},
                  {"ghost_y_max", p.ghost_y_max}}}};
}

/// Parses a JSON file; syntax errors and missing files are data errors.
inline Json read_json_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open " + path);
    }
    try {
        return Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
}

} // namespace plausi
