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

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace plausi {

/// Cell lookup for trilinear interpolation on a regular node lattice.
struct GridCell
{
    std::size_t base = 0; // linear index of the (i, j, k) corner
    double fx = 0.0;
    double fy = 0.0;
    double fz = 0.0;
};

/// Node lattice geometry shared by TSDF grids and shape manifolds.
struct GridGeometry
{
    int res = 64;
    Vec3 lo = Vec3::Constant(-1.0);
    Vec3 hi = Vec3::Constant(1.0);

    std::size_t node_count() const
    {
        const auto r = static_cast<std::size_t>(res);
        return r * r * r;
    }

    Vec3 spacing() const { return (hi - lo) / static_cast<double>(res - 1); }

    std::size_t index(int i, int j, int k) const
    {
        const auto r = static_cast<std::size_t>(res);
        return static_cast<std::size_t>(i) + r * (static_cast<std::size_t>(j) + r * static_cast<std::size_t>(k));
    }

    Vec3 node(int i, int j, int k) const
    {
        const Vec3 h = spacing();
        return {lo.x() + i * h.x(), lo.y() + j * h.y(), lo.z() + k * h.z()};
    }

    bool contains(const Vec3& x) const
    {
        return x.x() >= lo.x() && x.x() <= hi.x() && x.y() >= lo.y() && x.y() <= hi.y() &&
               x.z() >= lo.z() && x.z() <= hi.z();
    }

    /// Cell containing `x`, or nullopt outside the lattice bounds.
    std::optional<GridCell> locate(const Vec3& x) const
    {
        if (!contains(x)) {
            return std::nullopt;
        }
        const Vec3 h = spacing();
        const auto axis = [this](double rel, double step, int& cell) {
            const double s = rel / step;
            cell = std::min(static_cast<int>(s), res - 2);
            return s - cell;
        };
        int i = 0, j = 0, k = 0;
        GridCell c;
        c.fx = axis(x.x() - lo.x(), h.x(), i);
        c.fy = axis(x.y() - lo.y(), h.y(), j);
        c.fz = axis(x.z() - lo.z(), h.z(), k);
        c.base = index(i, j, k);
        return c;
    }

    /// Linear offsets of the 8 cell corners relative to `GridCell::base`, ordered by
    /// bit pattern (x = bit 0, y = bit 1, z = bit 2).
    std::array<std::size_t, 8> corner_offsets() const
    {
        const auto r = static_cast<std::size_t>(res);
        std::array<std::size_t, 8> o{};
        for (std::size_t b = 0; b < 8; ++b) {
            o[b] = (b & 1) + r * (((b >> 1) & 1) + r * ((b >> 2) & 1));
        }
        return o;
    }

    bool same_as(const GridGeometry& o) const { return res == o.res && lo == o.lo && hi == o.hi; }
};

/// Weighted sum of 8 corner values in `GridGeometry::corner_offsets` order.
inline double trilinear(const std::array<double, 8>& v, const GridCell& c)
{
    const double x00 = v[0] + c.fx * (v[1] - v[0]);
    const double x10 = v[2] + c.fx * (v[3] - v[2]);
    const double x01 = v[4] + c.fx * (v[5] - v[4]);
    const double x11 = v[6] + c.fx * (v[7] - v[6]);
    const double y0 = x00 + c.fy * (x10 - x00);
    const double y1 = x01 + c.fy * (x11 - x01);
    return y0 + c.fz * (y1 - y0);
}

/// Voxelized truncated signed distance field. Negative inside, clamped to [-truncation,
/// +truncation]; queries outside the lattice return +truncation.
struct TsdfGrid
{
    GridGeometry geometry;
    double truncation = 0.3;
    std::vector<double> values;

    TsdfGrid() = default;
    TsdfGrid(const GridGeometry& g, double trunc)
        : geometry(g), truncation(trunc), values(g.node_count(), trunc)
    {
    }

    double at(int i, int j, int k) const { return values[geometry.index(i, j, k)]; }

    double sample(const Vec3& x) const
    {
        const auto cell = geometry.locate(x);
        if (!cell) {
            return truncation;
        }
        std::array<double, 8> v{};
        const auto off = geometry.corner_offsets();
        for (std::size_t b = 0; b < 8; ++b) {
            v[b] = values[cell->base + off[b]];
        }
        return std::clamp(trilinear(v, *cell), -truncation, truncation);
    }
};

} // namespace plausi
