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
#include "plausi/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace plausi {

/// Plane a x + b y + c z = d with unit (a, b, c) and c > 0.5.
struct GroundPlane
{
    double a = 0.0;
    double b = 0.0;
    double c = 1.0;
    double d = 0.0;

    /// Normalizes (a, b, c, d) by |(a, b, c)| and orients the normal upward.
    static GroundPlane from_coefficients(double a, double b, double c, double d)
    {
        const double n = std::sqrt(a * a + b * b + c * c);
        if (!(n > 0.0)) {
            throw DegenerateInputError("plane normal has zero length");
        }
        const double s = (c < 0.0 ? -1.0 : 1.0) / n;
        GroundPlane g{a * s, b * s, c * s, d * s};
        if (!(g.c > 0.5)) {
            throw NoGroundError("plane is more than 60 degrees from horizontal");
        }
        return g;
    }

    static GroundPlane through(const Vec3& point, const Vec3& normal)
    {
        return from_coefficients(normal.x(), normal.y(), normal.z(), normal.dot(point));
    }

    Vec3 normal() const { return {a, b, c}; }

    double signed_distance(const Vec3& p) const { return a * p.x() + b * p.y() + c * p.z() - d; }
};

inline double ground_height(const GroundPlane& g, double x, double y) { return (g.d - g.a * x - g.b * y) / g.c; }

inline Vec3 plane_normal(const GroundPlane& g) { return g.normal(); }

struct RansacConfig
{
    int iters = 200;
    double inlier_tol = 0.05;
    int min_inliers = 50;
    std::uint64_t seed = 0;
    /// Only points with z below this value are plane candidates (ego sensor height).
    double max_candidate_z = std::numeric_limits<double>::infinity();
};

namespace detail {

inline int count_inliers(std::span<const Vec3> pts, const Vec3& n, double d, double tol)
{
    int count = 0;
    for (const Vec3& p : pts) {
        if (std::abs(n.dot(p) - d) <= tol) {
            ++count;
        }
    }
    return count;
}

} // namespace detail

/**
 * RANSAC plane fit followed by a least-squares refit over the inliers of the best
 * hypothesis. Ties between hypotheses go to the earliest iteration; the refit is kept
 * only if it does not lose inliers.
 */
inline GroundPlane fit_ransac(std::span<const Vec3> points, const RansacConfig& cfg = {})
{
    std::vector<Vec3> cand;
    cand.reserve(points.size());
    for (const Vec3& p : points) {
        if (p.z() < cfg.max_candidate_z) {
            cand.push_back(p);
        }
    }
    if (cand.size() < 3) {
        throw DegenerateInputError("plane fit needs at least three candidate points");
    }

    Rng rng(cfg.seed);
    const auto n = static_cast<std::uint64_t>(cand.size());
    int best_count = -1;
    Vec3 best_n = Vec3::UnitZ();
    double best_d = 0.0;
    for (int it = 0; it < cfg.iters; ++it) {
        const std::uint64_t i0 = rng.index(n);
        std::uint64_t i1 = rng.index(n - 1);
        if (i1 >= i0) ++i1;
        std::uint64_t i2 = rng.index(n - 2);
        if (i2 >= std::min(i0, i1)) ++i2;
        if (i2 >= std::max(i0, i1)) ++i2;
        const Vec3& p0 = cand[i0];
        Vec3 nrm = (cand[i1] - p0).cross(cand[i2] - p0);
        const double len = nrm.norm();
        if (len < 1e-12) {
            continue;
        }
        nrm /= len;
        if (nrm.z() < 0.0) {
            nrm = -nrm;
        }
        const double d = nrm.dot(p0);
        const int count = detail::count_inliers(cand, nrm, d, cfg.inlier_tol);
        if (count > best_count) {
            best_count = count;
            best_n = nrm;
            best_d = d;
        }
    }
    if (best_count < 0) {
        throw DegenerateInputError("all RANSAC samples were collinear");
    }
    if (best_count < cfg.min_inliers) {
        throw NoGroundError("ground plane has " + std::to_string(best_count) + " inliers, need " +
                            std::to_string(cfg.min_inliers));
    }

    std::vector<Vec3> inliers;
    inliers.reserve(static_cast<std::size_t>(best_count));
    for (const Vec3& p : cand) {
        if (std::abs(best_n.dot(p) - best_d) <= cfg.inlier_tol) {
            inliers.push_back(p);
        }
    }
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : inliers) centroid += p;
    centroid /= static_cast<double>(inliers.size());
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : inliers) {
        const Vec3 q = p - centroid;
        cov += q * q.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 refit_n = eig.eigenvectors().col(0);
    if (refit_n.z() < 0.0) {
        refit_n = -refit_n;
    }
    const double refit_d = refit_n.dot(centroid);
    const int refit_count = detail::count_inliers(cand, refit_n, refit_d, cfg.inlier_tol);
    if (refit_count >= best_count) {
        return GroundPlane::from_coefficients(refit_n.x(), refit_n.y(), refit_n.z(), refit_d);
    }
    return GroundPlane::from_coefficients(best_n.x(), best_n.y(), best_n.z(), best_d);
}

} // namespace plausi
