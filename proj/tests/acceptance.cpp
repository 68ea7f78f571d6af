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
#include "plausi/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

namespace plausi {
namespace {

using testing::default_manifold;
using Clock = std::chrono::steady_clock;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

Quat random_quat(Rng& rng)
{
    Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return q.normalized();
}

ShapeWeights random_shape(Rng& rng, double range)
{
    ShapeWeights z;
    for (double& v : z) v = rng.uniform(-range, range);
    return z;
}

/// Scene pieces for evaluating the energy of one GT car at arbitrary states.
struct CarView
{
    std::vector<Vec3> points;
    MaskProbabilities mask;
    EnergyContext ctx;
};

std::vector<std::unique_ptr<CarView>> car_views(const GeneratedScene& g, const PipelineConfig& cfg)
{
    std::vector<std::unique_ptr<CarView>> out;
    SceneContext sc(g.scene, default_manifold(), cfg);
    for (std::size_t k = 0; k < g.gt_boxes.size(); ++k) {
        const BoundingBox3D& b = g.gt_boxes[k];
        auto v = std::make_unique<CarView>();
        v->points = crop_points_ego(sc.object_points(), b, cfg.crop_margin, cfg.outlier_radius, cfg.min_neighbors);
        const auto rect = projected_box_rect(g.scene.camera, b);
        if (v->points.empty() || !rect) continue;
        const PixelRect region = dilate_rect(*rect, cfg.region_dilation, g.scene.camera.width, g.scene.camera.height);
        v->mask = mask_probabilities(g.scene.masks[k], region, cfg.render.downsample, cfg.mask_floor);
        v->ctx.points_ego = v->points;
        v->ctx.mask = &v->mask;
        v->ctx.plane = g.scene.plane;
        v->ctx.camera = &g.scene.camera;
        v->ctx.manifold = &default_manifold();
        v->ctx.box_dims = b.dims;
        v->ctx.render = cfg.render;
        v->ctx.huber_eps = cfg.huber_eps;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<GeneratedScene> draw_scenes(int n, std::uint64_t seed)
{
    DatasetSpec spec;
    spec.scenes = n;
    spec.hypotheses_per_scene = 0;
    std::vector<GeneratedScene> out;
    for (const DatasetScene& ds : generate_dataset(spec, seed)) out.push_back(ds.generated);
    return out;
}

Outcome ac1_energy_axioms()
{
    const auto t0 = Clock::now();
    const PipelineConfig cfg;
    const auto scenes = draw_scenes(10, 101);
    std::vector<std::unique_ptr<CarView>> views;
    std::vector<Vec3> centers;
    for (const GeneratedScene& g : scenes) {
        auto v = car_views(g, cfg);
        for (std::size_t k = 0; k < v.size(); ++k) centers.push_back(g.gt_boxes[k].center);
        for (auto& p : v) views.push_back(std::move(p));
    }
    Rng rng(11);
    const double cd_max = 2.0 * default_manifold().truncation() - cfg.huber_eps;
    int violations = 0;
    double sil_max = 0.0, cd_seen = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const std::size_t k = rng.index(views.size());
        Pose pose{centers[k] + Vec3(rng.normal(0, 1.5), rng.normal(0, 1.5), rng.normal(0, 0.5)), random_quat(rng)};
        // unnormalized quaternions are part of the state space
        const double s = rng.uniform(0.5, 2.0);
        pose.q = Quat{pose.q.w * s, pose.q.x * s, pose.q.y * s, pose.q.z * s};
        const StateVector st = StateVector::pack(pose, random_shape(rng, 1.5));
        const EnergyBreakdown e = composite_energy(st, views[k]->ctx, EnergyWeights::c1());
        const bool ok = e.e_sil >= 0.0 && e.e_sil <= 1.0 && e.e_cd >= 0.0 && e.e_cd <= cd_max && e.e_hog >= 0.0 &&
                        e.e_rot >= 0.0 && e.total >= 0.0 && std::isfinite(e.total);
        violations += !ok;
        sil_max = std::max(sil_max, e.e_sil);
        cd_seen = std::max(cd_seen, e.e_cd);
    }
    const double t = seconds_since(t0);
    return {violations == 0 && t < 10.0, std::to_string(draws) + " draws, " + std::to_string(violations) +
                                             " violations, max e_sil " + fmt(sil_max) + ", max e_cd " + fmt(cd_seen) +
                                             " (bound " + fmt(cd_max) + "), " + fmt(t, 3) + " s"};
}

Outcome ac2_exact_zeros()
{
    Rng rng(12);
    const GroundPlane flat;
    double prior_max = 0.0, cd_worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Vec3 dims(rng.uniform(3.5, 5.0), rng.uniform(1.6, 2.0), rng.uniform(1.3, 1.8));
        const BoundingBox3D b = box_on_plane(flat, rng.uniform(5, 25), rng.uniform(-8, 8), rng.uniform(-kPi, kPi), dims);
        prior_max = std::max({prior_max, energy_hog(b.pose(), dims.z(), flat),
                              energy_rot(quat_to_matrix(b.orientation), flat.normal())});
    }
    for (int i = 0; i < 10; ++i) {
        const Pose pose{Vec3(rng.uniform(6, 20), rng.uniform(-4, 4), 0.8), Quat::from_yaw(rng.uniform(-kPi, kPi))};
        const ShapeWeights z = random_shape(rng, 1.0);
        const auto pts = testing::surface_points(default_manifold(), z, pose, Vec3(0, 0, 1.8), 300, 0.0, 100 + i);
        cd_worst = std::max(cd_worst, energy_cd(pts, pose, default_manifold(), z, 0.01));
    }
    return {prior_max <= 1e-12 && cd_worst < 1e-6,
            "max e_hog/e_rot " + fmt(prior_max) + " on resting boxes, max e_cd " + fmt(cd_worst) + " on surface clouds"};
}

Outcome ac3_renderer_oracle()
{
    const auto t0 = Clock::now();
    const CameraModel cam = SceneSpec::default_camera();
    Rng rng(13);
    RenderConfig fast;
    RenderConfig dense = fast;
    dense.ray_step = fast.ray_step / 4;
    dense.cull = false;
    dense.refine = 1;
    double worst = 0.0;
    int boundary_misses = 0, renders = 0;
    for (int i = 0; i < 20; ++i) {
        const double x = rng.uniform(7, 22);
        const Pose pose{Vec3(x, rng.uniform(-0.3, 0.3) * x, 0.8), Quat::from_yaw(rng.uniform(-kPi, kPi))};
        const ShapeWeights z = random_shape(rng, 1.0);
        BoundingBox3D b{pose.t, ShapeFamilyParams{}.dims(), pose.q};
        const PixelRect region = dilate_rect(*projected_box_rect(cam, b), 1.2, cam.width, cam.height);
        const SilhouetteImage a = render_silhouette(default_manifold(), z, pose, cam, region, fast);
        const SilhouetteImage o = render_silhouette(default_manifold(), z, pose, cam, region, dense);
        ++renders;
        for (std::size_t k = 0; k < a.values.size(); ++k) worst = std::max(worst, std::abs(a.values[k] - o.values[k]));
        // a 0.5-level disagreement must have the oracle's boundary within one grid pixel
        for (int r = 0; r < a.rows; ++r) {
            for (int c = 0; c < a.cols; ++c) {
                const bool fa = a.values[static_cast<std::size_t>(r * a.cols + c)] > 0.5;
                const bool fo = o.values[static_cast<std::size_t>(r * o.cols + c)] > 0.5;
                if (fa == fo) continue;
                bool near = false;
                for (int dr = -1; dr <= 1 && !near; ++dr) {
                    for (int dc = -1; dc <= 1 && !near; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || cc < 0 || rr >= o.rows || cc >= o.cols) continue;
                        near = (o.values[static_cast<std::size_t>(rr * o.cols + cc)] > 0.5) == fa;
                    }
                }
                boundary_misses += !near;
            }
        }
    }
    const double t = seconds_since(t0);
    return {worst < 0.05 && boundary_misses == 0 && t < 60.0,
            std::to_string(renders) + " draws, max |dpi| " + fmt(worst) + ", boundary misses " +
                std::to_string(boundary_misses) + ", " + fmt(t, 3) + " s"};
}

/// Discrete structure of the composite at a state: per point its lattice cell, huber
/// branch and node truncation; per pixel the minimizing ray sample and its cell. The
/// composite is smooth along a segment on which this does not change.
std::vector<double> switch_signature(const StateVector& raw, const CarView& view)
{
    const ShapeManifold& m = default_manifold();
    const StateVector st = raw.normalized();
    const Pose pose = st.pose();
    const ShapeWeights z = ShapeManifold::clamp_weights(st.shape());
    const Mat3 r_inv = pose.rotation().transpose();
    std::vector<double> sig;
    const auto cell_of = [&](const Vec3& x) {
        const auto c = m.geometry().locate(x);
        return c ? static_cast<double>(c->base) : -1.0;
    };
    for (const Vec3& p : view.points) {
        const Vec3 x = r_inv * (p - pose.t);
        const double phi = m.evaluate_clamped(z, x);
        sig.push_back(cell_of(x));
        sig.push_back(phi * phi <= view.ctx.huber_eps ? 1.0 : 0.0);
        sig.push_back(m.evaluate_raw(z, x) == phi ? 1.0 : 0.0);
    }
    const CameraModel& cam = *view.ctx.camera;
    const MaskProbabilities& mp = *view.ctx.mask;
    const Vec3 origin = r_inv * (cam.center_ego() - pose.t);
    const Mat3 cam_to_obj = r_inv * cam.rotation.transpose();
    for (int row = 0; row < mp.rows; ++row) {
        for (int col = 0; col < mp.cols; ++col) {
            const Vec3 dir = cam_to_obj * pixel_ray(cam, mp.region.u0 + col * mp.stride, mp.region.v0 + row * mp.stride);
            double best_s = 0.0;
            const double phi = ray_min_phi(m, z, origin, dir, view.ctx.render, &best_s);
            sig.push_back(best_s);
            if (best_s > 0.0) {
                const Vec3 x = origin + best_s * dir;
                sig.push_back(cell_of(x));
                sig.push_back(m.evaluate_raw(z, x) == phi ? 1.0 : 0.0);
            }
        }
    }
    return sig;
}

Outcome ac4_gradient_sanity()
{
    const auto t0 = Clock::now();
    const PipelineConfig cfg;
    const auto scenes = draw_scenes(4, 104);
    std::vector<std::unique_ptr<CarView>> views;
    std::vector<BoundingBox3D> boxes;
    for (const GeneratedScene& g : scenes) {
        auto v = car_views(g, cfg);
        for (std::size_t k = 0; k < v.size(); ++k) boxes.push_back(g.gt_boxes[k]);
        for (auto& p : v) views.push_back(std::move(p));
    }
    Rng rng(14);
    const double h = 1e-5;
    int checked = 0, skipped = 0, failed = 0;
    std::array<int, StateVector::kSize> per_coord{};
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
        const std::size_t k = rng.index(views.size());
        const BoundingBox3D& b = boxes[k];
        Pose pose{b.center + Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.1)),
                  b.orientation * Quat::from_yaw(rng.normal(0, 0.2))};
        const StateVector st = StateVector::pack(pose, random_shape(rng, 0.8));
        const auto f = [&](const VecX& x) {
            return composite_total(StateVector::from_span(x.data()), views[k]->ctx, EnergyWeights::c1());
        };
        const VecX x0 = Eigen::Map<const VecX>(st.xi.data(), StateVector::kSize);
        const VecX g = numeric_gradient(f, x0, cfg.step1.fd_step);
        for (Eigen::Index c = 0; c < x0.size(); ++c) {
            const auto at = [&](double d) {
                VecX x = x0;
                x[c] += d;
                return f(x);
            };
            const double hc = h * std::max(1.0, std::abs(x0[c]));
            const auto richardson = [&](double s) {
                return (-at(2 * s) + 8 * at(s) - 8 * at(-s) + at(-2 * s)) / (12 * s);
            };
            const std::vector<double> sig0 = switch_signature(StateVector::from_span(x0.data()), *views[k]);
            bool smooth = true;
            const double fd = cfg.step1.fd_step * std::max(1.0, std::abs(x0[c]));
            for (double d : {-2 * hc, -hc, -fd, fd, hc, 2 * hc}) {
                VecX x = x0;
                x[c] += d;
                smooth = smooth && switch_signature(StateVector::from_span(x.data()), *views[k]) == sig0;
            }
            if (!smooth) {
                ++skipped;
                continue;
            }
            const double r2 = richardson(hc);
            ++checked;
            ++per_coord[static_cast<std::size_t>(c)];
            const double rel = std::abs(g[c] - r2) / std::max(std::abs(r2), 1e-3);
            worst = std::max(worst, rel);
            failed += rel > 1e-3;
        }
    }
    const double t = seconds_since(t0);
    // most coordinates, and every state entry, must get a comparison
    const bool enough = 2 * checked >= checked + skipped &&
                        *std::min_element(per_coord.begin(), per_coord.end()) >= 10;
    return {failed == 0 && enough && t < 60.0,
            std::to_string(checked) + " coordinates checked, " + std::to_string(skipped) +
                " skipped near switch points, fewest per state entry " +
                std::to_string(*std::min_element(per_coord.begin(), per_coord.end())) + ", worst relative error " +
                fmt(worst) + ", " + fmt(t, 3) + " s"};
}

Outcome ac5_prior_recovery()
{
    Rng rng(15);
    const EnergyWeights w{0.0, 0.0, EnergyWeights::c1().hog, EnergyWeights::c1().rot, 0.0};
    int ok = 0, worst_iters = 0;
    double worst_e = 0.0;
    for (int i = 0; i < 20; ++i) {
        const GroundPlane g = tilted_ground(rng.uniform(-3, 3), rng.uniform(-3, 3));
        const Vec3 dims(4.2, 1.8, 1.6);
        BoundingBox3D b = box_on_plane(g, rng.uniform(6, 25), rng.uniform(-6, 6), rng.uniform(-kPi, kPi), dims);
        b.center.z() += rng.uniform(0.5, 2.5);
        const double axis = rng.uniform(0, 2 * kPi);
        b.orientation = b.orientation * Quat::from_axis_angle(Vec3(std::cos(axis), std::sin(axis), 0), deg2rad(rng.uniform(10, 60)));
        EnergyContext ctx;
        ctx.plane = g;
        ctx.box_dims = dims;
        const auto f = [&](const VecX& x) { return composite_total(StateVector::from_span(x.data()), ctx, w); };
        const StateVector s0 = StateVector::pack(b.pose(), ShapeWeights{});
        Bounds bounds = Bounds::unbounded(StateVector::kSize);
        for (Eigen::Index k = 7; k < bounds.lo.size(); ++k) {
            bounds.lo[k] = -1.0;
            bounds.hi[k] = 1.0;
        }
        OptimizerConfig oc = PipelineConfig{}.step1;
        oc.max_iters = 50;
        const OptimResult r = minimize_bounded(f, Eigen::Map<const VecX>(s0.xi.data(), StateVector::kSize), bounds, oc);
        const Pose p = StateVector::from_span(r.x.data()).normalized().pose();
        const double m = std::max(energy_hog(p, dims.z(), g), energy_rot(p.rotation(), g.normal()));
        worst_e = std::max(worst_e, m);
        worst_iters = std::max(worst_iters, r.trace.iterations());
        ok += m < 1e-4 && r.trace.iterations() <= 50;
    }
    return {ok == 20, std::to_string(ok) + "/20 recovered, worst term " + fmt(worst_e) + ", max iterations " +
                          std::to_string(worst_iters)};
}

Outcome ac6_silhouette_decay()
{
    const PipelineConfig cfg;
    int ok = 0;
    double init_min = 1.0, final_max = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(derive_seed(16, static_cast<std::uint64_t>(seed)));
        const double x = rng.uniform(9, 16);
        const GeneratedScene g = generate_scene(
            testing::single_car_spec(x, rng.uniform(-0.2, 0.2) * x, rng.uniform(-kPi, kPi), 1000 + seed));
        const SceneContext sc(g.scene, default_manifold(), cfg);
        // offset across the line of sight so the silhouette moves
        const Vec3 sight = (g.gt_boxes[0].center - g.scene.camera.center_ego()).normalized();
        const Vec3 lateral = Vec3(-sight.y(), sight.x(), 0.0).normalized() * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        Hypothesis h;
        h.box = g.gt_boxes[0];
        h.box.center += lateral;
        h.id = "ac6";
        VerifyTrace tr;
        const Verdict v = verify_hypothesis(h, sc, cfg, nullptr, &tr);
        if (v.stage != Stage::Optimized) continue;
        const MaskProbabilities mp =
            mask_probabilities(g.scene.masks[tr.mask_index], tr.region, cfg.render.downsample, cfg.mask_floor);
        const auto sil = [&](const StateVector& s) {
            const StateVector n = s.normalized();
            return energy_sil(mp, render_silhouette(default_manifold(), n.shape(), n.pose(), g.scene.camera, tr.region,
                                                    cfg.render));
        };
        const double e0 = sil(tr.initial), e1 = sil(tr.after_c1);
        init_min = std::min(init_min, e0);
        final_max = std::max(final_max, e1);
        ok += e0 > 0.4 && e1 < 0.05;
    }
    return {ok >= 8, std::to_string(ok) + "/10 seeds decayed, min initial e_sil " + fmt(init_min) +
                         ", max step-1 e_sil " + fmt(final_max)};
}

struct TimedRun
{
    std::vector<VerdictRecord> rows;
    std::vector<double> seconds;
};

/// verify_bundle, single-threaded, with per-hypothesis wall time.
TimedRun timed_verify(const Bundle& bundle, const ShapeManifold& m, const VerifyConfig& cfg)
{
    TimedRun out;
    for (std::size_t i = 0; i < bundle.scenes.size(); ++i) {
        const PreparedScene p = prepare_scene(bundle.scenes[i], i, cfg);
        const SceneContext ctx(p.scene, m, cfg.pipeline);
        for (const LabeledHypothesis& lh : bundle.scenes[i].hypotheses) {
            const auto t0 = Clock::now();
            VerdictRecord r;
            r.verdict = verify_hypothesis(lh.hypothesis, ctx, cfg.pipeline);
            out.seconds.push_back(seconds_since(t0));
            r.scene = bundle.scenes[i].id;
            r.mode = lh.mode;
            r.is_tp = lh.is_tp;
            out.rows.push_back(std::move(r));
        }
    }
    return out;
}

struct ClassificationRun
{
    TimedRun run;
    double seconds = 0.0;
};

const ClassificationRun& classification_run()
{
    static const ClassificationRun result = [] {
        ClassificationRun c;
        const auto t0 = Clock::now();
        DatasetSpec spec;
        spec.scenes = 20;
        spec.hypotheses_per_scene = 10;
        spec.trucks = 0;
        spec.truck_hypotheses = false;
        const auto dir = testing::temp_dir("acceptance_ac7");
        write_bundle(dir, generate_dataset(spec, 2026), spec, 2026, default_manifold());
        const Bundle b = read_bundle(dir);
        const ShapeManifold m = b.load_shape_manifold();
        c.run = timed_verify(b, m, VerifyConfig{});
        c.seconds = seconds_since(t0);
        return c;
    }();
    return result;
}

Outcome ac7_classification()
{
    const ClassificationRun& c = classification_run();
    const auto samples = labeled_energies(c.run.rows);
    const Confusion at5 = confusion_at(samples, 0.5), at25 = confusion_at(samples, 0.25);
    const double tpr = static_cast<double>(at5.tp) / static_cast<double>(at5.tp + at5.fn);
    const double fpr = static_cast<double>(at5.fp) / static_cast<double>(at5.fp + at5.tn);
    const double fpr25 = static_cast<double>(at25.fp) / static_cast<double>(at25.fp + at25.tn);
    const bool balanced = at5.tp + at5.fn == at5.fp + at5.tn;
    return {balanced && c.run.rows.size() == 200 && tpr >= 0.85 && fpr <= 0.15 && fpr25 < fpr && c.seconds < 600.0,
            std::to_string(c.run.rows.size()) + " hypotheses, TPR " + fmt(tpr) + ", FPR " + fmt(fpr) +
                " at kappa 0.5, FPR " + fmt(fpr25) + " at 0.25, " + fmt(c.seconds, 3) + " s"};
}

Outcome ac8_truck_gate()
{
    DatasetSpec spec;
    spec.scenes = 20;
    spec.cars_min = 0;
    spec.cars_max = 0;
    spec.trucks = 1;
    spec.hypotheses_per_scene = 0;
    spec.truck_hypotheses = true;
    const auto dir = testing::temp_dir("acceptance_ac8");
    write_bundle(dir, generate_dataset(spec, 2027), spec, 2027, default_manifold());
    const Bundle b = read_bundle(dir);
    const auto rows = verify_bundle(b, default_manifold(), VerifyConfig{}, 1);
    int rejected = 0, dims = 0;
    for (const VerdictRecord& r : rows) {
        const bool reject = !r.verdict.plausible &&
                            (r.verdict.stage == Stage::GatedDims || r.verdict.final_energy > PipelineConfig{}.kappa);
        rejected += reject;
        dims += r.verdict.stage == Stage::GatedDims;
    }
    return {rows.size() == 20 && rejected >= 19, std::to_string(rejected) + "/" + std::to_string(rows.size()) +
                                                     " trucks rejected (" + std::to_string(dims) + " by the dims gate)"};
}

Outcome ac9_throughput()
{
    const ClassificationRun& c = classification_run();
    double opt = 0.0, gated = 0.0, gated_max = 0.0;
    int n_opt = 0, n_gated = 0;
    for (std::size_t i = 0; i < c.run.rows.size(); ++i) {
        if (c.run.rows[i].verdict.stage == Stage::Optimized) {
            opt += c.run.seconds[i];
            ++n_opt;
        } else {
            gated += c.run.seconds[i];
            gated_max = std::max(gated_max, c.run.seconds[i]);
            ++n_gated;
        }
    }
    const double mean_opt = n_opt ? opt / n_opt : 0.0;
    const double mean_gated = n_gated ? gated / n_gated : 0.0;
    return {n_opt > 0 && mean_opt <= 1.5 && gated_max <= 0.005,
            "optimized mean " + fmt(mean_opt) + " s over " + std::to_string(n_opt) + ", gated mean " +
                fmt(mean_gated * 1e3) + " ms (max " + fmt(gated_max * 1e3) + " ms) over " + std::to_string(n_gated)};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "plausi");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome ac10_determinism()
{
    const auto root = testing::temp_dir("acceptance_ac10");
    {
        std::ofstream(root / "spec.json") << R"({"scenes": 3, "hypotheses_per_scene": 6, "trucks": 1})";
    }
    std::vector<std::string> files[2];
    for (int run = 0; run < 2; ++run) {
        const std::string d = (root / ("run" + std::to_string(run))).string();
        if (cli({"generate", "--spec", (root / "spec.json").string(), "--seed", "99", "--out", d + "/bundle"}) != 0 ||
            cli({"verify", "--bundle", d + "/bundle", "--jobs", "1", "--out", d + "/verdicts.csv"}) != 0 ||
            cli({"evaluate", d + "/verdicts.csv", "--out", d + "/eval"}) != 0) {
            return {false, "pipeline run " + std::to_string(run) + " failed"};
        }
        for (const char* f : {"/verdicts.csv", "/eval/roc.csv", "/eval/pr.csv", "/eval/summary.json",
                              "/bundle/manifest.json", "/bundle/scene_000/cloud.bin"}) {
            files[run].push_back(slurp(d + f));
        }
    }
    int differing = 0;
    for (std::size_t i = 0; i < files[0].size(); ++i) differing += files[0][i] != files[1][i] || files[0][i].empty();
    return {differing == 0, std::to_string(files[0].size() - static_cast<std::size_t>(differing)) + "/" +
                                std::to_string(files[0].size()) + " artifacts byte-identical across runs"};
}

} // namespace
} // namespace plausi

/// Optional arguments select criteria by tag (AC1 ... AC10); default runs all.
int main(int argc, char** argv)
{
    using plausi::Outcome;
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"AC1 energy axioms", plausi::ac1_energy_axioms},
        {"AC2 exact zeros", plausi::ac2_exact_zeros},
        {"AC3 renderer oracle", plausi::ac3_renderer_oracle},
        {"AC4 gradient sanity", plausi::ac4_gradient_sanity},
        {"AC5 prior recovery", plausi::ac5_prior_recovery},
        {"AC6 silhouette decay", plausi::ac6_silhouette_decay},
        {"AC7 classification", plausi::ac7_classification},
        {"AC8 truck gate", plausi::ac8_truck_gate},
        {"AC9 throughput", plausi::ac9_throughput},
        {"AC10 determinism", plausi::ac10_determinism},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        const std::string tag = std::string(name).substr(0, std::string(name).find(' '));
        bool selected = argc < 2;
        for (int i = 1; i < argc; ++i) selected = selected || tag == argv[i];
        if (!selected) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
