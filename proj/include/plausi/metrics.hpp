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

#include <algorithm>
#include <span>
#include <vector>

namespace plausi {

struct LabeledEnergy
{
    double energy = 0.0;
    bool is_tp = false;
};

struct RocPoint
{
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    bool tpr_undefined = false; ///< no positives; tpr emitted as 0
    bool fpr_undefined = false; ///< no negatives; fpr emitted as 0
};

struct PrPoint
{
    double threshold = 0.0;
    double precision = 1.0;
    double recall = 0.0;
    bool precision_undefined = false; ///< no predicted positives; precision emitted as 1
    bool recall_undefined = false;    ///< no positives; recall emitted as 0
};

struct Confusion
{
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Predicted plausible iff energy <= threshold.
inline Confusion confusion_at(std::span<const LabeledEnergy> samples, double threshold)
{
    Confusion c;
    for (const LabeledEnergy& s : samples) {
        const bool pred = s.energy <= threshold;
        if (s.is_tp) {
            (pred ? c.tp : c.fn)++;
        } else {
            (pred ? c.fp : c.tn)++;
        }
    }
    return c;
}

namespace detail {

inline void check_sweep(std::span<const LabeledEnergy> samples, std::span<const double> thresholds)
{
    if (samples.empty()) {
        throw PreconditionError("metrics need at least one labeled verdict");
    }
    if (thresholds.empty()) {
        throw ConfigError("threshold list is empty");
    }
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > thresholds[i - 1])) {
            throw ConfigError("thresholds must be strictly ascending");
        }
    }
}

} // namespace detail

inline std::vector<RocPoint> sweep_roc(std::span<const LabeledEnergy> samples, std::span<const double> thresholds)
{
    detail::check_sweep(samples, thresholds);
    std::vector<RocPoint> out;
    for (double t : thresholds) {
        const Confusion c = confusion_at(samples, t);
        RocPoint p;
        p.threshold = t;
        const long pos = c.tp + c.fn, neg = c.fp + c.tn;
        p.tpr_undefined = pos == 0;
        p.fpr_undefined = neg == 0;
        p.tpr = pos == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(pos);
        p.fpr = neg == 0 ? 0.0 : static_cast<double>(c.fp) / static_cast<double>(neg);
        out.push_back(p);
    }
    return out;
}

inline std::vector<PrPoint> pr_curve(std::span<const LabeledEnergy> samples, std::span<const double> thresholds)
{
    detail::check_sweep(samples, thresholds);
    std::vector<PrPoint> out;
    for (double t : thresholds) {
        const Confusion c = confusion_at(samples, t);
        PrPoint p;
        p.threshold = t;
        const long predicted = c.tp + c.fp, pos = c.tp + c.fn;
        p.precision_undefined = predicted == 0;
        p.recall_undefined = pos == 0;
        p.precision = predicted == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(predicted);
        p.recall = pos == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(pos);
        out.push_back(p);
    }
    return out;
}

/// n uniform thresholds over [lo, hi].
inline std::vector<double> uniform_thresholds(double lo, double hi, int n)
{
    if (n < 2 || !(hi > lo)) {
        throw ConfigError("threshold grid needs n >= 2 and hi > lo");
    }
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        t[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    }
    return t;
}

inline std::vector<double> default_thresholds() { return uniform_thresholds(0.0, 2.0, 101); }

/// Trapezoidal area under the swept ROC points, closed with (0, 0) and (1, 1).
inline double roc_auc(std::span<const RocPoint> roc)
{
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    for (const RocPoint& p : roc) pts.emplace_back(p.fpr, p.tpr);
    pts.emplace_back(1.0, 1.0);
    std::sort(pts.begin(), pts.end());
    double a = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        a += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
    }
    return a;
}

} // namespace plausi
