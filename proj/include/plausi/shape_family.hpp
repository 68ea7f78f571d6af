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
#include "plausi/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace plausi {

/// Parameters of the analytic car shape: a rounded body slab with a rounded cabin slab on
/// top. The object frame has its origin at the bounding-box center, x along the length and
/// z up; the shape exactly fills a (length, width, height) box.
struct ShapeFamilyParams
{
    double length = 4.2;
    double width = 1.8;
    double height = 1.6;
    double cabin_ratio = 0.55;
    double roundness = 0.6;

    // synthetic car envelope
    static constexpr double kLengthMin = 3.2, kLengthMax = 5.2;
    static constexpr double kWidthMin = 1.5, kWidthMax = 2.1;
    static constexpr double kHeightMin = 1.3, kHeightMax = 2.0;
    static constexpr double kCabinMin = 0.4, kCabinMax = 0.7;
    static constexpr double kRoundMin = 0.2, kRoundMax = 1.0;

    void validate() const
    {
        const auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
        if (!in(length, kLengthMin, kLengthMax) || !in(width, kWidthMin, kWidthMax) ||
            !in(height, kHeightMin, kHeightMax)) {
            throw ConfigError("shape dimensions outside the car envelope");
        }
        if (!(cabin_ratio > 0.0 && cabin_ratio <= 1.0 && roundness > 0.0 && roundness <= 1.0)) {
            throw ConfigError("cabin_ratio and roundness must lie in (0, 1]");
        }
    }

    Vec3 dims() const { return {length, width, height}; }

    static Vec3 envelope_min() { return {kLengthMin, kWidthMin, kHeightMin}; }
    static Vec3 envelope_max() { return {kLengthMax, kWidthMax, kHeightMax}; }
};

/// Exact signed distance to an axis-aligned rounded box centered at the origin.
inline double rounded_box_sdf(const Vec3& p, const Vec3& half, double radius)
{
    const Vec3 q = p.cwiseAbs() - (half - Vec3::Constant(radius));
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside - radius;
}

struct RoundedSlab
{
    Vec3 center;
    Vec3 half;
    double radius;

    double sdf(const Vec3& p) const { return rounded_box_sdf(p - center, half, radius); }
};

inline RoundedSlab car_body(const ShapeFamilyParams& p)
{
    const Vec3 half(0.5 * p.length, 0.5 * p.width, 0.3 * p.height);
    const double r = std::min(0.1 * p.roundness, 0.9 * half.minCoeff());
    return {Vec3(0.0, 0.0, -0.5 * p.height + half.z()), half, r};
}

inline RoundedSlab car_cabin(const ShapeFamilyParams& p)
{
    // the cabin reaches 0.35 m into the body so that the union has no internal seam
    const double body_top = 0.1 * p.height;
    const double bottom = body_top - 0.35;
    const double top = 0.5 * p.height;
    const Vec3 half(0.5 * p.cabin_ratio * p.length, 0.44 * p.width, 0.5 * (top - bottom));
    const double shift = std::min(0.08 * p.length, 0.5 * p.length - half.x());
    const double r = std::min(0.25 * p.roundness, 0.9 * half.minCoeff());
    return {Vec3(-shift, 0.0, 0.5 * (top + bottom)), half, r};
}

/// Signed distance of the analytic car at an object-frame point. Exact outside the
/// shape; inside, the union's min underestimates depth near the concave body/cabin seam.
inline double car_sdf(const ShapeFamilyParams& p, const Vec3& x)
{
    return std::min(car_body(p).sdf(x), car_cabin(p).sdf(x));
}

/// Box-shaped truck: a cargo box behind a lower cab, filling (length, width, height).
struct TruckParams
{
    double length = 8.0;
    double width = 2.5;
    double height = 3.2;

    Vec3 dims() const { return {length, width, height}; }
};

inline double truck_sdf(const TruckParams& t, const Vec3& x)
{
    const double cab_len = std::min(2.2, 0.3 * t.length);
    const RoundedSlab cargo{Vec3(0.5 * cab_len, 0.0, 0.0),
                           Vec3(0.5 * (t.length - cab_len), 0.5 * t.width, 0.5 * t.height), 0.05};
    const double cab_h = 0.8 * t.height;
    const RoundedSlab cab{Vec3(-0.5 * t.length + 0.5 * cab_len + 0.01, 0.0, -0.5 * t.height + 0.5 * cab_h),
                         Vec3(0.5 * cab_len + 0.01, 0.5 * t.width, 0.5 * cab_h), 0.1};
    return std::min(cargo.sdf(x), cab.sdf(x));
}

/// Object-frame lattice bounds shared by every family member: 1.2x the largest family
/// dimensions, widened where needed so each face sits at least one truncation width
/// away from the largest shape.
inline GridGeometry family_grid(int res, double truncation)
{
    if (res < 8) {
        throw ConfigError("TSDF resolution must be at least 8");
    }
    const Vec3 big = ShapeFamilyParams::envelope_max();
    const Vec3 half = (0.6 * big).cwiseMax(0.5 * big + Vec3::Constant(truncation));
    return {res, -half, half};
}

inline TsdfGrid synthesize_tsdf(const ShapeFamilyParams& p, int res = 64, double truncation = 0.3)
{
    p.validate();
    if (!(truncation > 0.0)) {
        throw ConfigError("truncation must be positive");
    }
    TsdfGrid grid(family_grid(res, truncation), truncation);
    const RoundedSlab body = car_body(p);
    const RoundedSlab cabin = car_cabin(p);
    for (int k = 0; k < res; ++k) {
        for (int j = 0; j < res; ++j) {
            for (int i = 0; i < res; ++i) {
                const Vec3 x = grid.geometry.node(i, j, k);
                const double d = std::min(body.sdf(x), cabin.sdf(x));
                grid.values[grid.geometry.index(i, j, k)] = std::clamp(d, -truncation, truncation);
            }
        }
    }
    return grid;
}

/// Radical inverse in base `b`, used for the Halton sequence.
inline double radical_inverse(unsigned index, unsigned base)
{
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (index > 0) {
        r += f * (index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

/// `count` family members on a 5D Halton sequence over the envelope (indices 1..count).
inline std::vector<ShapeFamilyParams> sample_family(int count)
{
    std::vector<ShapeFamilyParams> out;
    out.reserve(static_cast<std::size_t>(count));
    constexpr unsigned primes[5] = {2, 3, 5, 7, 11};
    const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    using P = ShapeFamilyParams;
    for (int n = 1; n <= count; ++n) {
        const auto u = [&](int d) { return radical_inverse(static_cast<unsigned>(n), primes[d]); };
        out.push_back({lerp(P::kLengthMin, P::kLengthMax, u(0)), lerp(P::kWidthMin, P::kWidthMax, u(1)),
                       lerp(P::kHeightMin, P::kHeightMax, u(2)), lerp(P::kCabinMin, P::kCabinMax, u(3)),
                       lerp(P::kRoundMin, P::kRoundMax, u(4))});
    }
    return out;
}

} // namespace plausi
