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
#include "plausi/rng.hpp"
#include "plausi/synthgen.hpp"

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace plausi {

/// Recipe for a set of synthetic scenes with labeled hypotheses.
struct DatasetSpec
{
    int scenes = 20;
    int cars_min = 1;
    int cars_max = 4;
    int trucks = 0; ///< per scene
    double max_slope_deg = 3.0;
    /// Car-derived hypotheses per scene, half TP and half FP.
    int hypotheses_per_scene = 10;
    /// Adds each truck's own box as an FP car hypothesis.
    bool truck_hypotheses = true;
    LidarConfig lidar;
    CameraModel camera = SceneSpec::default_camera();
    PerturbSpec perturb;
    bool visible_masks = false;
    int mask_morph = 0;
    double mask_row_dropout = 0.0;

    void validate() const
    {
        if (scenes < 1 || cars_min < 0 || cars_max < cars_min || trucks < 0 || cars_max + trucks > 6) {
            throw ConfigError("dataset needs >= 1 scene and 0 to 6 objects per scene");
        }
        if (cars_min < 1 && hypotheses_per_scene > 0) {
            throw ConfigError("perturbed hypotheses need at least one car per scene");
        }
        if (!(max_slope_deg >= 0.0 && max_slope_deg <= 5.0)) {
            throw ConfigError("ground slope is limited to 5 degrees");
        }
        if (hypotheses_per_scene < 0) {
            throw ConfigError("hypotheses_per_scene must be non-negative");
        }
        lidar.validate();
        camera.validate();
        perturb.validate();
    }
};

struct DatasetScene
{
    std::string id;
    SceneSpec spec;
    GeneratedScene generated;
    std::vector<LabeledHypothesis> hypotheses;
};

inline std::string scene_id(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%03d", index);
    return buf;
}

/// Scene `index` of a dataset: a pure function of (spec, seed, index).
inline DatasetScene generate_dataset_scene(const DatasetSpec& spec, std::uint64_t seed, int index)
{
    Rng rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(index)));
    DatasetScene ds;
    ds.id = scene_id(index);
    SceneSpec& s = ds.spec;
    s.n_cars = spec.cars_min + static_cast<int>(rng.index(static_cast<std::uint64_t>(spec.cars_max - spec.cars_min + 1)));
    s.n_trucks = spec.trucks;
    s.pitch_deg = rng.uniform(-spec.max_slope_deg, spec.max_slope_deg);
    s.roll_deg = rng.uniform(-spec.max_slope_deg, spec.max_slope_deg);
    s.lidar = spec.lidar;
    s.camera = spec.camera;
    s.seed = rng.next();
    s.visible_masks = spec.visible_masks;
    s.mask_morph = spec.mask_morph;
    s.mask_row_dropout = spec.mask_row_dropout;
    ds.generated = generate_scene(s);

    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "s%03d_h", index);
    std::vector<BoundingBox3D> cars;
    for (const SceneObject& o : ds.generated.objects) {
        if (o.kind == SceneObject::Kind::Car) cars.push_back(o.box);
    }
    if (spec.hypotheses_per_scene > 0 && !cars.empty()) {
        PerturbSpec ps = spec.perturb;
        ps.count = spec.hypotheses_per_scene;
        ps.ground = ds.generated.scene.plane;
        ds.hypotheses = perturb_hypotheses(cars, ps, derive_seed(seed, 2 * static_cast<std::uint64_t>(index) + 1), prefix);
    }
    if (spec.truck_hypotheses) {
        for (std::size_t k = 0; k < ds.generated.objects.size(); ++k) {
            const SceneObject& o = ds.generated.objects[k];
            if (o.kind != SceneObject::Kind::Truck) continue;
            LabeledHypothesis lh;
            lh.hypothesis.box = o.box;
            lh.hypothesis.id = prefix + std::to_string(ds.hypotheses.size());
            lh.is_tp = false;
            lh.mode = "truck";
            lh.source_gt = static_cast<int>(k);
            ds.hypotheses.push_back(lh);
        }
    }
    return ds;
}

inline std::vector<DatasetScene> generate_dataset(const DatasetSpec& spec, std::uint64_t seed)
{
    spec.validate();
    std::vector<DatasetScene> out;
    for (int i = 0; i < spec.scenes; ++i) {
        out.push_back(generate_dataset_scene(spec, seed, i));
    }
    return out;
}

} // namespace plausi
