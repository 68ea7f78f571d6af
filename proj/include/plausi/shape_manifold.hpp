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
#include "plausi/shape_family.hpp"
#include "plausi/tsdf.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <type_traits>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace plausi {

/**
 * Affine TSDF shape space: phi(z) = mean + sum_i z_i * V_i.
 *
 * Components are mutually orthogonal principal directions of the training grids, scaled
 * so that z_i = +-1 corresponds to +-2 standard deviations of the training coefficients.
 * Node values are stored with float32 precision so that the binary file round trip is
 * bit-exact. Immutable after construction.
 */
class ShapeManifold
{
public:
    ShapeManifold() = default;

    ShapeManifold(TsdfGrid mean, std::vector<TsdfGrid> components, std::vector<double> singular_values)
        : mean_(std::move(mean)), components_(std::move(components)),
          singular_values_(std::move(singular_values))
    {
        if (components_.size() > kNumShapeWeights || singular_values_.size() != components_.size()) {
            throw ConfigError("manifold needs at most 5 components, one singular value each");
        }
        for (const TsdfGrid& c : components_) {
            if (!c.geometry.same_as(mean_.geometry)) {
                throw ConfigError("component grid does not match the mean grid");
            }
        }
        interleave();
    }

    const TsdfGrid& mean() const { return mean_; }
    const std::vector<TsdfGrid>& components() const { return components_; }
    const std::vector<double>& singular_values() const { return singular_values_; }
    const GridGeometry& geometry() const { return mean_.geometry; }
    double truncation() const { return mean_.truncation; }
    std::size_t component_count() const { return components_.size(); }

    /// Radius of the sphere around the object origin that encloses the lattice.
    double bounding_radius() const
    {
        return std::max(geometry().lo.norm(), geometry().hi.norm());
    }

    /// z clamped to [-1, 1]; `clamped` reports whether anything changed.
    static ShapeWeights clamp_weights(const ShapeWeights& z, bool* clamped = nullptr)
    {
        ShapeWeights out = z;
        bool changed = false;
        for (double& v : out) {
            const double c = std::clamp(v, -1.0, 1.0);
            changed = changed || c != v;
            v = c;
        }
        if (clamped != nullptr) {
            *clamped = changed;
        }
        return out;
    }

    /// Signed distance at an object-frame point: node values of the decoded shape are
    /// truncated to [-delta, delta], then trilinearly interpolated. Weights outside
    /// [-1, 1] are clamped (reported through `clamped`).
    double evaluate(const ShapeWeights& z, const Vec3& x, bool* clamped = nullptr) const
    {
        const ShapeWeights zc = clamp_weights(z, clamped);
        return evaluate_clamped(zc, x);
    }

    /// Same as `evaluate` for weights already known to lie in [-1, 1].
    double evaluate_clamped(const ShapeWeights& z, const Vec3& x) const
    {
        const auto cell = geometry().locate(x);
        if (!cell) {
            return truncation();
        }
        const double d = truncation();
        std::array<double, 8> v{};
        for (std::size_t b = 0; b < 8; ++b) {
            v[b] = std::clamp(node_value(cell->base + offsets_[b], z), -d, d);
        }
        return trilinear(v, *cell);
    }

    /// Value and d(phi)/d(z_i) at weights already in [-1, 1]. Truncated nodes contribute
    /// no gradient; outside the lattice the gradient is zero.
    double evaluate_with_gradient(const ShapeWeights& z, const Vec3& x, ShapeWeights& grad) const
    {
        grad.fill(0.0);
        const auto cell = geometry().locate(x);
        if (!cell) {
            return truncation();
        }
        const double d = truncation();
        std::array<double, 8> v{};
        for (std::size_t b = 0; b < 8; ++b) {
            const std::size_t node = cell->base + offsets_[b];
            const double raw = node_value(node, z);
            v[b] = std::clamp(raw, -d, d);
            if (raw < -d || raw > d) {
                continue;
            }
            const double w = ((b & 1) ? cell->fx : 1.0 - cell->fx) * ((b & 2) ? cell->fy : 1.0 - cell->fy) *
                             ((b & 4) ? cell->fz : 1.0 - cell->fz);
            const double* p = &nodes_[node * stride_];
            for (std::size_t i = 0; i + 1 < stride_; ++i) {
                grad[i] += w * p[i + 1];
            }
        }
        return trilinear(v, *cell);
    }

    /// Interpolated value without node truncation; affine in z. Outside the lattice +delta.
    double evaluate_raw(const ShapeWeights& z, const Vec3& x) const
    {
        const auto cell = geometry().locate(x);
        if (!cell) {
            return truncation();
        }
        std::array<double, 8> v{};
        for (std::size_t b = 0; b < 8; ++b) {
            v[b] = node_value(cell->base + offsets_[b], z);
        }
        return trilinear(v, *cell);
    }

    /// Full decoded grid at weights z (clamped to [-1, 1]).
    TsdfGrid decode(const ShapeWeights& z_in) const
    {
        const ShapeWeights z = clamp_weights(z_in);
        TsdfGrid out(geometry(), truncation());
        const double d = truncation();
        for (std::size_t n = 0; n < out.values.size(); ++n) {
            out.values[n] = std::clamp(node_value(n, z), -d, d);
        }
        return out;
    }

private:
    double node_value(std::size_t node, const ShapeWeights& z) const
    {
        const double* p = &nodes_[node * stride_];
        double v = p[0];
        for (std::size_t i = 0; i + 1 < stride_; ++i) {
            v += z[i] * p[i + 1];
        }
        return v;
    }

    void interleave()
    {
        stride_ = 1 + components_.size();
        const std::size_t n = mean_.values.size();
        nodes_.assign(n * stride_, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            nodes_[k * stride_] = mean_.values[k];
            for (std::size_t c = 0; c < components_.size(); ++c) {
                nodes_[k * stride_ + 1 + c] = components_[c].values[k];
            }
        }
        offsets_ = geometry().corner_offsets();
    }

    TsdfGrid mean_;
    std::vector<TsdfGrid> components_;
    std::vector<double> singular_values_;
    std::vector<double> nodes_;
    std::size_t stride_ = 1;
    std::array<std::size_t, 8> offsets_{};
};

inline double evaluate_phi(const ShapeManifold& m, const ShapeWeights& z, const Vec3& x_obj)
{
    return m.evaluate(z, x_obj);
}

inline TsdfGrid decode_shape(const ShapeManifold& m, const ShapeWeights& z) { return m.decode(z); }

namespace detail {

inline double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

} // namespace detail

/**
 * PCA over flattened training grids. The mean is the elementwise average; component i is
 * the i-th principal direction of the centered samples times 2 sigma_i, where sigma_i is
 * the standard deviation of the training coefficients along that direction. Computed from
 * the K x K Gram matrix, so cost is linear in the grid size.
 */
inline ShapeManifold build_manifold(const std::vector<TsdfGrid>& samples, std::size_t n_components = 5)
{
    if (samples.size() < 2) {
        throw PreconditionError("build_manifold needs at least two sample grids");
    }
    if (n_components > kNumShapeWeights) {
        throw ConfigError("at most 5 shape components are supported");
    }
    const GridGeometry& geo = samples.front().geometry;
    for (const TsdfGrid& g : samples) {
        if (!g.geometry.same_as(geo) || g.truncation != samples.front().truncation ||
            g.values.size() != geo.node_count()) {
            throw ConfigError("sample grids must share resolution, extent and truncation");
        }
    }
    const auto k = static_cast<Eigen::Index>(samples.size());
    const auto n = static_cast<Eigen::Index>(geo.node_count());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (const TsdfGrid& g : samples) {
        mean += Eigen::Map<const Eigen::VectorXd>(g.values.data(), n);
    }
    mean /= static_cast<double>(k);

    Eigen::MatrixXd centered(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        centered.col(c) = Eigen::Map<const Eigen::VectorXd>(samples[static_cast<std::size_t>(c)].values.data(), n) - mean;
    }
    const Eigen::MatrixXd gram = centered.transpose() * centered;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);

    const double scale = 2.0 / std::sqrt(static_cast<double>(k - 1));
    const std::size_t n_keep = std::min<std::size_t>(n_components, static_cast<std::size_t>(k));
    TsdfGrid mean_grid(geo, samples.front().truncation);
    for (Eigen::Index i = 0; i < n; ++i) {
        mean_grid.values[static_cast<std::size_t>(i)] = detail::to_float_precision(mean(i));
    }
    std::vector<TsdfGrid> components;
    std::vector<double> singular;
    for (std::size_t c = 0; c < n_keep; ++c) {
        const Eigen::Index col = k - 1 - static_cast<Eigen::Index>(c); // eigenvalues ascend
        const double lambda = std::max(eig.eigenvalues()(col), 0.0);
        Eigen::VectorXd dir = centered * eig.eigenvectors().col(col) * scale;
        // deterministic sign: largest-magnitude entry positive
        Eigen::Index arg = 0;
        dir.cwiseAbs().maxCoeff(&arg);
        if (dir(arg) < 0.0) {
            dir = -dir;
        }
        TsdfGrid g(geo, samples.front().truncation);
        for (Eigen::Index i = 0; i < n; ++i) {
            g.values[static_cast<std::size_t>(i)] = detail::to_float_precision(dir(i));
        }
        components.push_back(std::move(g));
        singular.push_back(std::sqrt(lambda));
    }
    return ShapeManifold(std::move(mean_grid), std::move(components), std::move(singular));
}

/// Manifold over the default synthetic car family (count Halton samples).
inline ShapeManifold build_default_manifold(int res = 64, double truncation = 0.3, int count = 40)
{
    std::vector<TsdfGrid> grids;
    grids.reserve(static_cast<std::size_t>(count));
    for (const ShapeFamilyParams& p : sample_family(count)) {
        grids.push_back(synthesize_tsdf(p, res, truncation));
    }
    return build_manifold(grids, kNumShapeWeights);
}

// ---------------------------------------------------------------------------------------
// Binary format (all little-endian):
//   "TSDFMAN1" | u32 res | f64 lo[3] | f64 hi[3] | f64 truncation | u32 n_components
//   | f32 mean[res^3] | f32 component[n][res^3] | f64 singular[n]
// Grids are x-fastest.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw DataError("unexpected end of binary stream");
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(buf[i]) << (8 * i);
    }
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}

} // namespace detail

inline constexpr char kManifoldMagic[8] = {'T', 'S', 'D', 'F', 'M', 'A', 'N', '1'};

inline void write_manifold(std::ostream& os, const ShapeManifold& m)
{
    os.write(kManifoldMagic, sizeof(kManifoldMagic));
    const GridGeometry& g = m.geometry();
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.res));
    for (int a = 0; a < 3; ++a) detail::write_le<double>(os, g.lo[a]);
    for (int a = 0; a < 3; ++a) detail::write_le<double>(os, g.hi[a]);
    detail::write_le<double>(os, m.truncation());
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.component_count()));
    const auto write_grid = [&os](const TsdfGrid& grid) {
        for (double v : grid.values) detail::write_le<float>(os, static_cast<float>(v));
    };
    write_grid(m.mean());
    for (const TsdfGrid& c : m.components()) write_grid(c);
    for (double s : m.singular_values()) detail::write_le<double>(os, s);
}

inline ShapeManifold read_manifold(std::istream& is)
{
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kManifoldMagic, sizeof(magic)) != 0) {
        throw DataError("not a TSDF manifold file (bad magic)");
    }
    GridGeometry g;
    g.res = static_cast<int>(detail::read_le<std::uint32_t>(is));
    if (g.res < 2 || g.res > 1024) {
        throw DataError("manifold resolution out of range");
    }
    for (int a = 0; a < 3; ++a) g.lo[a] = detail::read_le<double>(is);
    for (int a = 0; a < 3; ++a) g.hi[a] = detail::read_le<double>(is);
    const double trunc = detail::read_le<double>(is);
    const auto nc = detail::read_le<std::uint32_t>(is);
    if (nc > kNumShapeWeights) {
        throw DataError("manifold has more than 5 components");
    }
    const auto read_grid = [&]() {
        TsdfGrid grid(g, trunc);
        for (double& v : grid.values) v = static_cast<double>(detail::read_le<float>(is));
        return grid;
    };
    TsdfGrid mean = read_grid();
    std::vector<TsdfGrid> comps;
    for (std::uint32_t c = 0; c < nc; ++c) comps.push_back(read_grid());
    std::vector<double> sv;
    for (std::uint32_t c = 0; c < nc; ++c) sv.push_back(detail::read_le<double>(is));
    return ShapeManifold(std::move(mean), std::move(comps), std::move(sv));
}

inline void save_manifold(const std::string& path, const ShapeManifold& m)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open " + path + " for writing");
    }
    write_manifold(os, m);
}

inline ShapeManifold load_manifold(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot open manifold file " + path);
    }
    return read_manifold(is);
}

} // namespace plausi
