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

#include "plausi/bundle.hpp"
#include "plausi/metrics.hpp"
#include "plausi/renderer.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace plausi {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Parses "lo:hi:n" or a comma-separated ascending list.
inline std::vector<double> parse_thresholds(const std::string& text)
{
    if (text.empty()) return default_thresholds();
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) {
            throw ConfigError("thresholds range must look like lo:hi:n");
        }
        try {
            return uniform_thresholds(parse_double(parts[0]), parse_double(parts[1]),
                                      static_cast<int>(parse_int(parts[2])));
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        for (const std::string& f : split_csv_line(text)) out.push_back(parse_double(f));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out[i] > out[i - 1])) throw ConfigError("thresholds must be strictly ascending");
    }
    return out;
}

/// --jobs value, then PLAUSI_JOBS, then 1.
inline int resolve_jobs(int flag)
{
    if (flag > 0) return flag;
    if (const char* env = std::getenv("PLAUSI_JOBS")) {
        try {
            const long long v = parse_int(env);
            if (v > 0) return static_cast<int>(v);
        } catch (const DataError&) {
        }
        throw ConfigError("PLAUSI_JOBS must be a positive integer");
    }
    return 1;
}

inline VerifyConfig load_verify_config(const std::string& path)
{
    VerifyConfig cfg;
    if (!path.empty()) apply_verify_config(read_json_file(path), cfg);
    cfg.pipeline.validate();
    return cfg;
}

/// Scene with its estimated ground, ready for verification.
struct PreparedScene
{
    const BundleScene* source = nullptr;
    Scene scene;
};

inline PreparedScene prepare_scene(const BundleScene& bs, std::size_t index, const VerifyConfig& cfg)
{
    PreparedScene p;
    p.source = &bs;
    p.scene = bs.scene;
    if (!cfg.true_plane) {
        RansacConfig rc = cfg.ransac;
        rc.seed = derive_seed(cfg.ransac.seed, index);
        p.scene.plane = fit_ransac(p.scene.cloud, rc);
    }
    return p;
}

/// Verifies every hypothesis of the bundle on `jobs` threads; rows follow manifest order.
inline std::vector<VerdictRecord> verify_bundle(const Bundle& bundle, const ShapeManifold& manifold,
                                                const VerifyConfig& cfg, int jobs, WorkCounters* counters = nullptr)
{
    cfg.pipeline.validate();
    std::vector<PreparedScene> prepared;
    prepared.reserve(bundle.scenes.size());
    for (std::size_t i = 0; i < bundle.scenes.size(); ++i) {
        prepared.push_back(prepare_scene(bundle.scenes[i], i, cfg));
    }
    std::vector<SceneContext> contexts;
    contexts.reserve(prepared.size());
    for (const PreparedScene& p : prepared) contexts.emplace_back(p.scene, manifold, cfg.pipeline);

    struct Task
    {
        std::size_t scene, hyp;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < prepared.size(); ++s) {
        for (std::size_t h = 0; h < prepared[s].source->hypotheses.size(); ++h) tasks.push_back({s, h});
    }
    std::vector<VerdictRecord> rows(tasks.size());
    const auto run = [&](std::size_t i) {
        const BundleScene& bs = *prepared[tasks[i].scene].source;
        const LabeledHypothesis& lh = bs.hypotheses[tasks[i].hyp];
        rows[i].scene = bs.id;
        rows[i].mode = lh.mode;
        rows[i].is_tp = lh.is_tp;
        rows[i].verdict = verify_hypothesis(lh.hypothesis, contexts[tasks[i].scene], cfg.pipeline, counters);
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run(i);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next++; i < tasks.size(); i = next++) run(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return rows;
}

inline std::vector<LabeledEnergy> labeled_energies(std::span<const VerdictRecord> rows)
{
    std::vector<LabeledEnergy> out;
    out.reserve(rows.size());
    for (const VerdictRecord& r : rows) out.push_back({r.verdict.final_energy, r.is_tp});
    return out;
}

inline void write_roc_csv(std::ostream& os, std::span<const RocPoint> roc)
{
    os << "threshold,tpr,fpr,tpr_undefined,fpr_undefined\n";
    for (const RocPoint& p : roc) {
        os << format_double(p.threshold) << ',' << format_double(p.tpr) << ',' << format_double(p.fpr) << ','
           << (p.tpr_undefined ? 1 : 0) << ',' << (p.fpr_undefined ? 1 : 0) << '\n';
    }
}

inline void write_pr_csv(std::ostream& os, std::span<const PrPoint> pr)
{
    os << "threshold,precision,recall,precision_undefined,recall_undefined\n";
    for (const PrPoint& p : pr) {
        os << format_double(p.threshold) << ',' << format_double(p.precision) << ',' << format_double(p.recall)
           << ',' << (p.precision_undefined ? 1 : 0) << ',' << (p.recall_undefined ? 1 : 0) << '\n';
    }
}

inline Json operating_point(std::span<const LabeledEnergy> samples, double threshold)
{
    const Confusion c = confusion_at(samples, threshold);
    const auto ratio = [](long a, long b) { return b > 0 ? Json(static_cast<double>(a) / b) : Json(); };
    return Json{{"threshold", threshold},      {"tp", c.tp},
                {"fp", c.fp},                  {"tn", c.tn},
                {"fn", c.fn},                  {"tpr", ratio(c.tp, c.tp + c.fn)},
                {"fpr", ratio(c.fp, c.fp + c.tn)}, {"precision", ratio(c.tp, c.tp + c.fp)}};
}

inline Json summarize(std::span<const VerdictRecord> rows, std::span<const RocPoint> roc)
{
    const auto samples = labeled_energies(rows);
    long positives = 0, flagged = 0;
    std::map<std::string, long> stages;
    for (const VerdictRecord& r : rows) {
        positives += r.is_tp;
        flagged += r.verdict.fp_flag;
        stages[to_string(r.verdict.stage)]++;
    }
    Json ops = Json::array();
    for (double t : {0.25, 0.5}) ops.push_back(operating_point(samples, t));
    return Json{{"hypotheses", rows.size()},
                {"positives", positives},
                {"negatives", static_cast<long>(rows.size()) - positives},
                {"auc", roc_auc(roc)},
                {"operating_points", ops},
                {"fp_flagged", flagged},
                {"stages", stages}};
}

/// Plain-text summary with gate counts per stage and per hypothesis mode.
inline void write_report(std::ostream& os, std::span<const VerdictRecord> rows, double kappa)
{
    std::map<std::string, std::map<std::string, long>> table; // mode -> stage -> count
    std::map<std::string, long> plausible_by_mode;
    long optimized = 0, iters1 = 0, iters2 = 0;
    for (const VerdictRecord& r : rows) {
        table[r.mode][to_string(r.verdict.stage)]++;
        plausible_by_mode[r.mode] += r.verdict.final_energy <= kappa;
        if (r.verdict.stage == Stage::Optimized) {
            ++optimized;
            iters1 += r.verdict.iters_c1;
            iters2 += r.verdict.iters_c2;
        }
    }
    const auto samples = labeled_energies(rows);
    const Confusion c = confusion_at(samples, kappa);
    os << "hypotheses: " << rows.size() << " (tp " << c.tp + c.fn << ", fp " << c.fp + c.tn << ")\n";
    os << "kappa " << format_double(kappa) << ": tp " << c.tp << ", fn " << c.fn << ", fp " << c.fp << ", tn " << c.tn;
    if (c.tp + c.fn > 0) os << ", tpr " << format_double(static_cast<double>(c.tp) / (c.tp + c.fn));
    if (c.fp + c.tn > 0) os << ", fpr " << format_double(static_cast<double>(c.fp) / (c.fp + c.tn));
    os << '\n';

    const Stage order[] = {Stage::GatedDistance, Stage::GatedDims,  Stage::GatedPoints,
                           Stage::GatedNoMask,   Stage::GatedPrior, Stage::Optimized};
    os << "\nstage counts\n";
    for (Stage s : order) {
        long n = 0;
        for (const auto& [mode, counts] : table) {
            const auto it = counts.find(to_string(s));
            if (it != counts.end()) n += it->second;
        }
        os << "  " << to_string(s) << ": " << n << '\n';
    }
    os << "\nby mode (gated-distance/dims/points/no-mask/prior/optimized, plausible)\n";
    for (const auto& [mode, counts] : table) {
        os << "  " << mode << ':';
        for (Stage s : order) {
            const auto it = counts.find(to_string(s));
            os << ' ' << (it == counts.end() ? 0 : it->second);
        }
        os << ", " << plausible_by_mode[mode] << '\n';
    }
    if (optimized > 0) {
        os << "\nmean iterations: step 1 " << format_double(static_cast<double>(iters1) / optimized) << ", step 2 "
           << format_double(static_cast<double>(iters2) / optimized) << '\n';
    }
}

inline void write_trace_csv(std::ostream& os, const OptimTrace& trace)
{
    os << "iteration,objective,grad_norm";
    for (int i = 0; i < 12; ++i) os << ",x" << i;
    os << '\n';
    for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
        const OptimIterate& it = trace.iterates[k];
        os << k << ',' << format_double(it.objective) << ',' << format_double(it.grad_norm);
        for (Eigen::Index i = 0; i < it.x.size(); ++i) os << ',' << format_double(it.x(i));
        os << '\n';
    }
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot write " + path.string());
    }
    os << text;
}

inline std::vector<VerdictRecord> read_verdicts_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot open verdicts " + path);
    }
    return read_verdicts_csv(is);
}

inline void ensure_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create directory " + dir.string());
    }
}

inline int cmd_generate(const std::string& spec_path, std::uint64_t seed, const std::string& out, std::ostream& log)
{
    const DatasetSpec spec = spec_path.empty() ? DatasetSpec{} : dataset_spec_from_json(read_json_file(spec_path));
    const auto scenes = generate_dataset(spec, seed);
    const ShapeManifold manifold = build_default_manifold();
    write_bundle(out, scenes, spec, seed, manifold);
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.hypotheses.size();
    log << "wrote " << scenes.size() << " scenes, " << n << " hypotheses to " << out << '\n';
    return kExitOk;
}

inline int cmd_verify(const std::string& bundle_path, const std::string& config, const std::string& out, int jobs,
                      std::ostream& log)
{
    const VerifyConfig cfg = load_verify_config(config);
    const Bundle bundle = read_bundle(bundle_path);
    const ShapeManifold manifold = bundle.load_shape_manifold();
    const auto rows = verify_bundle(bundle, manifold, cfg, resolve_jobs(jobs));
    std::ostringstream os;
    write_verdicts_csv(os, rows);
    write_text(out, os.str());
    log << "wrote " << rows.size() << " verdicts to " << out << '\n';
    return kExitOk;
}

inline int cmd_evaluate(const std::string& verdicts, const std::string& thresholds, const std::string& out,
                        std::ostream& log)
{
    const auto grid = parse_thresholds(thresholds);
    const auto rows = read_verdicts_file(verdicts);
    const auto samples = labeled_energies(rows);
    const auto roc = sweep_roc(samples, grid);
    const auto pr = pr_curve(samples, grid);
    ensure_dir(out);
    const std::filesystem::path dir(out);
    std::ostringstream roc_os, pr_os;
    write_roc_csv(roc_os, roc);
    write_pr_csv(pr_os, pr);
    write_text(dir / "roc.csv", roc_os.str());
    write_text(dir / "pr.csv", pr_os.str());
    write_text(dir / "summary.json", summarize(rows, roc).dump(2) + "\n");
    log << "wrote roc.csv, pr.csv, summary.json to " << out << '\n';
    return kExitOk;
}

inline int cmd_report(const std::string& verdicts, const std::string& config, const std::string& out,
                      std::ostream& stdout_)
{
    const VerifyConfig cfg = load_verify_config(config);
    const auto rows = read_verdicts_file(verdicts);
    std::ostringstream os;
    write_report(os, rows, cfg.pipeline.kappa);
    if (out.empty()) {
        stdout_ << os.str();
    } else {
        write_text(out, os.str());
    }
    return kExitOk;
}

inline int cmd_trace(const std::string& bundle_path, const std::string& config, const std::string& trace_id,
                     const std::string& out, std::ostream& log)
{
    const VerifyConfig cfg = load_verify_config(config);
    const Bundle bundle = read_bundle(bundle_path);
    for (std::size_t s = 0; s < bundle.scenes.size(); ++s) {
        const BundleScene& bs = bundle.scenes[s];
        for (const LabeledHypothesis& lh : bs.hypotheses) {
            if (lh.hypothesis.id != trace_id) continue;
            const ShapeManifold manifold = bundle.load_shape_manifold();
            const PreparedScene p = prepare_scene(bs, s, cfg);
            const SceneContext ctx(p.scene, manifold, cfg.pipeline);
            VerifyTrace trace;
            const Verdict v = verify_hypothesis(lh.hypothesis, ctx, cfg.pipeline, nullptr, &trace);
            ensure_dir(out);
            const std::filesystem::path dir(out);
            Json summary{{"scene", bs.id},
                         {"id", v.id},
                         {"label", lh.is_tp ? "tp" : "fp"},
                         {"mode", lh.mode},
                         {"stage", to_string(v.stage)},
                         {"final_energy", format_double(v.final_energy)},
                         {"plausible", v.plausible},
                         {"fp_flag", v.fp_flag}};
            if (v.stage == Stage::Optimized && v.optimized_state) {
                std::ostringstream c1, c2;
                write_trace_csv(c1, trace.c1);
                write_trace_csv(c2, trace.c2);
                write_text(dir / "trace_c1.csv", c1.str());
                write_text(dir / "trace_c2.csv", c2.str());
                const RenderConfig& rc = cfg.pipeline.render;
                const auto render = [&](const StateVector& st, const char* name) {
                    const auto img = render_silhouette(manifold, st.shape(), st.pose(), p.scene.camera, trace.region, rc);
                    write_silhouette_pgm((dir / name).string(), img);
                };
                render(trace.initial, "silhouette_initial.pgm");
                render(trace.after_c1, "silhouette_c1.pgm");
                render(trace.after_c2, "silhouette_c2.pgm");
                const MaskProbabilities mp = mask_probabilities(p.scene.masks[static_cast<std::size_t>(trace.mask_index)],
                                                                trace.region, rc.downsample, cfg.pipeline.mask_floor);
                SilhouetteImage mask_img;
                mask_img.region = mp.region;
                mask_img.stride = mp.stride;
                mask_img.cols = mp.cols;
                mask_img.rows = mp.rows;
                mask_img.values = mp.p_fg;
                write_silhouette_pgm((dir / "mask.pgm").string(), mask_img);
                summary["region"] = {trace.region.u0, trace.region.v0, trace.region.u1, trace.region.v1};
            }
            write_text(dir / "trace.json", summary.dump(2) + "\n");
            log << "traced " << trace_id << " (" << to_string(v.stage) << ") into " << out << '\n';
            return kExitOk;
        }
    }
    throw DataError("no hypothesis with id '" + trace_id + "' in " + bundle_path);
}

} // namespace detail

/// Entry point of the command-line tool. Returns 0 on success, 1 on usage errors, 2 on
/// data errors.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Plausibility verification of 3D car detections against lidar, masks and a shape prior"};
    app.require_subcommand(1);
    std::string spec, bundle, config, output, thresholds, trace_id, verdicts;
    std::uint64_t seed = 0;
    int jobs = 0;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic scene bundle");
    gen->add_option("--spec", spec, "Dataset spec JSON (defaults when omitted)");
    gen->add_option("--seed", seed, "Generation seed")->required();
    gen->add_option("--out", output, "Bundle directory")->required();

    auto* ver = app.add_subcommand("verify", "Verify every hypothesis of a bundle");
    ver->add_option("--bundle", bundle, "Bundle directory")->required();
    ver->add_option("--config", config, "Pipeline config overrides (JSON)");
    ver->add_option("--out", output, "Verdicts CSV")->required();
    ver->add_option("--jobs", jobs, "Worker threads (falls back to PLAUSI_JOBS, then 1)")->check(CLI::PositiveNumber);

    auto* eva = app.add_subcommand("evaluate", "ROC and PR curves from verdicts");
    eva->add_option("verdicts", verdicts, "Verdicts CSV")->required();
    eva->add_option("--thresholds", thresholds, "lo:hi:n or an ascending comma list (default 0:2:101)");
    eva->add_option("--out", output, "Output directory")->required();

    auto* rep = app.add_subcommand("report", "Human-readable summary with gate counts");
    rep->add_option("verdicts", verdicts, "Verdicts CSV")->required();
    rep->add_option("--config", config, "Pipeline config (for kappa)");
    rep->add_option("--out", output, "Write the report here instead of stdout");

    auto* tra = app.add_subcommand("trace", "Optimizer traces and silhouettes for one hypothesis");
    tra->add_option("--bundle", bundle, "Bundle directory")->required();
    tra->add_option("--trace-id", trace_id, "Hypothesis id")->required();
    tra->add_option("--config", config, "Pipeline config overrides (JSON)");
    tra->add_option("--out", output, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return detail::cmd_generate(spec, seed, output, err);
        if (ver->parsed()) return detail::cmd_verify(bundle, config, output, jobs, err);
        if (eva->parsed()) return detail::cmd_evaluate(verdicts, thresholds, output, err);
        if (rep->parsed()) return detail::cmd_report(verdicts, config, output, out);
        if (tra->parsed()) return detail::cmd_trace(bundle, config, trace_id, output, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

} // namespace plausi
