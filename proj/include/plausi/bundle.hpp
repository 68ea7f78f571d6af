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

#include "plausi/config_io.hpp"
#include "plausi/csv.hpp"
#include "plausi/dataset.hpp"
#include "plausi/image.hpp"
#include "plausi/pipeline.hpp"
#include "plausi/shape_manifold.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace plausi {

inline constexpr const char* kBundleFormat = "plausi-bundle/1";

struct BundleScene
{
    std::string id;
    Scene scene; ///< scene.plane holds the true ground as generated
    std::vector<BoundingBox3D> gt_boxes;
    std::vector<std::string> gt_kinds; ///< "car" or "truck"
    std::vector<LabeledHypothesis> hypotheses;
};

struct Bundle
{
    std::filesystem::path root;
    std::uint64_t seed = 0;
    Json spec;
    std::string manifold_file; ///< relative to root
    std::vector<BundleScene> scenes;

    ShapeManifold load_shape_manifold() const { return load_manifold((root / manifold_file).string()); }
};

inline void write_cloud(const std::string& path, std::span<const Vec3> cloud)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open " + path + " for writing");
    }
    for (const Vec3& p : cloud) {
        for (int a = 0; a < 3; ++a) detail::write_le<float>(os, static_cast<float>(p[a]));
    }
}

inline std::vector<Vec3> read_cloud(const std::string& path, std::size_t count)
{
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) {
        throw DataError("cannot open cloud " + path);
    }
    const auto size = static_cast<std::size_t>(is.tellg());
    if (size != count * 12) {
        throw DataError(path + ": expected " + std::to_string(count) + " points, file holds " +
                        std::to_string(size) + " bytes");
    }
    is.seekg(0);
    std::vector<Vec3> out(count);
    for (Vec3& p : out) {
        for (int a = 0; a < 3; ++a) p[a] = static_cast<double>(detail::read_le<float>(is));
    }
    return out;
}

namespace detail {

inline Json hypothesis_json(const LabeledHypothesis& lh)
{
    return Json{{"id", lh.hypothesis.id},   {"label", lh.is_tp ? "tp" : "fp"}, {"mode", lh.mode},
                {"source_gt", lh.source_gt}, {"score", lh.hypothesis.score},     {"box", to_json(lh.hypothesis.box)}};
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key)) {
        throw DataError(where + ": missing '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw DataError(where + "." + key + ": wrong value type");
    }
}

inline const Json& member(const Json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key)) {
        throw DataError(where + ": missing '" + key + "'");
    }
    return j.at(key);
}

} // namespace detail

/// Writes generated scenes as a bundle directory; existing bundle files are overwritten.
inline void write_bundle(const std::filesystem::path& root, const std::vector<DatasetScene>& scenes,
                         const DatasetSpec& spec, std::uint64_t seed, const ShapeManifold& manifold)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) {
        throw DataError("cannot create bundle directory " + root.string());
    }
    save_manifold((root / "manifold.bin").string(), manifold);

    Json jscenes = Json::array();
    for (const DatasetScene& ds : scenes) {
        const Scene& sc = ds.generated.scene;
        fs::create_directories(root / ds.id, ec);
        if (ec) {
            throw DataError("cannot create " + (root / ds.id).string());
        }
        const std::string cloud_file = ds.id + "/cloud.bin";
        write_cloud((root / cloud_file).string(), sc.cloud);
        Json masks = Json::array();
        for (std::size_t k = 0; k < sc.masks.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "/mask_%03zu.pgm", k);
            const std::string file = ds.id + name;
            write_mask_pgm((root / file).string(), sc.masks[k]);
            masks.push_back(file);
        }
        Json gt = Json::array();
        for (const SceneObject& o : ds.generated.objects) {
            gt.push_back({{"kind", o.kind == SceneObject::Kind::Car ? "car" : "truck"}, {"box", to_json(o.box)}});
        }
        Json hyps = Json::array();
        for (const LabeledHypothesis& lh : ds.hypotheses) hyps.push_back(detail::hypothesis_json(lh));
        jscenes.push_back({{"id", ds.id},
                           {"camera", to_json(sc.camera)},
                           {"plane_truth", to_json(sc.plane)},
                           {"cloud", {{"file", cloud_file}, {"count", sc.cloud.size()}}},
                           {"masks", masks},
                           {"gt", gt},
                           {"hypotheses", hyps}});
    }
    const Json manifest{{"format", kBundleFormat},
                        {"seed", seed},
                        {"spec", to_json(spec)},
                        {"manifold", "manifold.bin"},
                        {"scenes", jscenes}};
    std::ofstream os(root / "manifest.json", std::ios::binary);
    if (!os) {
        throw DataError("cannot write " + (root / "manifest.json").string());
    }
    os << manifest.dump(1) << '\n';
}

inline Bundle read_bundle(const std::filesystem::path& root)
{
    namespace fs = std::filesystem;
    const fs::path manifest_path = root / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw DataError("no manifest.json in " + root.string());
    }
    const Json m = read_json_file(manifest_path.string());
    if (detail::field<std::string>(m, "format", "manifest") != kBundleFormat) {
        throw DataError("unsupported bundle format in " + manifest_path.string());
    }
    Bundle b;
    b.root = root;
    b.seed = detail::field<std::uint64_t>(m, "seed", "manifest");
    b.spec = detail::member(m, "spec", "manifest");
    b.manifold_file = detail::field<std::string>(m, "manifold", "manifest");
    if (!fs::exists(root / b.manifold_file)) {
        throw DataError("missing manifold file " + (root / b.manifold_file).string());
    }
    const Json& scenes = detail::member(m, "scenes", "manifest");
    if (!scenes.is_array()) {
        throw DataError("manifest.scenes must be an array");
    }
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const Json& js = scenes[i];
        const std::string where = "manifest.scenes[" + std::to_string(i) + "]";
        BundleScene bs;
        bs.id = detail::field<std::string>(js, "id", where);
        try {
            bs.scene.camera = camera_from_json(detail::member(js, "camera", where), where + ".camera");
            bs.scene.plane = plane_from_json(detail::member(js, "plane_truth", where), where + ".plane_truth");
        } catch (const ConfigError& e) {
            throw DataError(e.what());
        } catch (const DegenerateInputError& e) {
            throw DataError(e.what());
        }
        const Json& cloud = detail::member(js, "cloud", where);
        bs.scene.cloud = read_cloud((root / detail::field<std::string>(cloud, "file", where + ".cloud")).string(),
                                    detail::field<std::size_t>(cloud, "count", where + ".cloud"));
        for (const Json& f : detail::member(js, "masks", where)) {
            if (!f.is_string()) throw DataError(where + ".masks: expected file names");
            BinaryMask mask = read_mask_pgm((root / f.get<std::string>()).string());
            if (mask.width != bs.scene.camera.width || mask.height != bs.scene.camera.height) {
                throw DataError(f.get<std::string>() + ": mask size differs from the camera image");
            }
            bs.scene.masks.push_back(std::move(mask));
        }
        for (const Json& g : detail::member(js, "gt", where)) {
            const std::string kind = detail::field<std::string>(g, "kind", where + ".gt");
            if (kind != "car" && kind != "truck") throw DataError(where + ".gt: unknown kind '" + kind + "'");
            bs.gt_kinds.push_back(kind);
            bs.gt_boxes.push_back(box_from_json(detail::member(g, "box", where + ".gt"), where + ".gt.box"));
        }
        for (const Json& h : detail::member(js, "hypotheses", where)) {
            const std::string hw = where + ".hypotheses";
            LabeledHypothesis lh;
            lh.hypothesis.id = detail::field<std::string>(h, "id", hw);
            const std::string label = detail::field<std::string>(h, "label", hw);
            if (label != "tp" && label != "fp") throw DataError(hw + ": label must be tp or fp");
            lh.is_tp = label == "tp";
            lh.mode = detail::field<std::string>(h, "mode", hw);
            lh.source_gt = detail::field<int>(h, "source_gt", hw);
            lh.hypothesis.score = detail::field<double>(h, "score", hw);
            lh.hypothesis.box = box_from_json(detail::member(h, "box", hw), hw + ".box");
            bs.hypotheses.push_back(std::move(lh));
        }
        b.scenes.push_back(std::move(bs));
    }
    return b;
}

/// One row of the verdicts table.
struct VerdictRecord
{
    std::string scene;
    std::string mode;
    bool is_tp = false;
    Verdict verdict;
};

inline const std::vector<std::string>& verdict_columns()
{
    static const std::vector<std::string> cols{
        "scene",   "id",      "label",    "mode",     "stage",    "prior_energy", "c1_sil",   "c1_cd",
        "c1_hog",  "c1_rot",  "c1_total", "c2_sil",   "c2_cd",    "c2_hog",       "c2_rot",   "c2_total",
        "final_energy", "plausible", "fp_flag", "iters_c1", "iters_c2", "points", "diagnostic"};
    return cols;
}

inline void write_verdicts_csv(std::ostream& os, std::span<const VerdictRecord> rows)
{
    const auto& cols = verdict_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const VerdictRecord& r : rows) {
        const Verdict& v = r.verdict;
        os << csv_safe(r.scene) << ',' << csv_safe(v.id) << ',' << (r.is_tp ? "tp" : "fp") << ','
           << csv_safe(r.mode) << ',' << to_string(v.stage) << ',' << format_double(v.prior_energy);
        for (const EnergyBreakdown* b : {&v.breakdown_c1, &v.breakdown_c2}) {
            os << ',' << format_double(b->e_sil) << ',' << format_double(b->e_cd) << ',' << format_double(b->e_hog)
               << ',' << format_double(b->e_rot) << ',' << format_double(b->total);
        }
        os << ',' << format_double(v.final_energy) << ',' << (v.plausible ? 1 : 0) << ',' << (v.fp_flag ? 1 : 0)
           << ',' << v.iters_c1 << ',' << v.iters_c2 << ',' << v.point_count << ',' << csv_safe(v.diagnostic)
           << '\n';
    }
}

inline std::vector<VerdictRecord> read_verdicts_csv(std::istream& is)
{
    const CsvTable t = read_csv(is);
    if (t.header != verdict_columns()) {
        throw DataError("verdicts CSV header does not match the expected columns");
    }
    std::vector<VerdictRecord> out;
    for (const auto& row : t.rows) {
        VerdictRecord r;
        Verdict& v = r.verdict;
        r.scene = row[0];
        v.id = row[1];
        if (row[2] != "tp" && row[2] != "fp") throw DataError("verdict label must be tp or fp");
        r.is_tp = row[2] == "tp";
        r.mode = row[3];
        const auto stage = stage_from_string(row[4]);
        if (!stage) throw DataError("unknown verdict stage '" + row[4] + "'");
        v.stage = *stage;
        v.prior_energy = parse_double(row[5]);
        std::size_t c = 6;
        for (EnergyBreakdown* b : {&v.breakdown_c1, &v.breakdown_c2}) {
            b->e_sil = parse_double(row[c++]);
            b->e_cd = parse_double(row[c++]);
            b->e_hog = parse_double(row[c++]);
            b->e_rot = parse_double(row[c++]);
            b->total = parse_double(row[c++]);
        }
        v.final_energy = parse_double(row[16]);
        v.plausible = parse_int(row[17]) != 0;
        v.fp_flag = parse_int(row[18]) != 0;
        v.iters_c1 = static_cast<int>(parse_int(row[19]));
        v.iters_c2 = static_cast<int>(parse_int(row[20]));
        v.point_count = static_cast<int>(parse_int(row[21]));
        v.diagnostic = row[22];
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace plausi
