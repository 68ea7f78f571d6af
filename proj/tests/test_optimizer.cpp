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
#include "plausi/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace plausi {
namespace {

VecX vec(std::initializer_list<double> v)
{
    VecX x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

double rosenbrock(const VecX& x)
{
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
}

TEST(NumericGradient, QuadraticAndConstant)
{
    const VecX g = numeric_gradient([](const VecX& x) { return x.squaredNorm(); }, vec({1, 2}));
    EXPECT_NEAR(g[0], 2.0, 1e-6);
    EXPECT_NEAR(g[1], 4.0, 1e-6);
    const VecX c = numeric_gradient([](const VecX&) { return 7.0; }, vec({3, -4, 5}));
    EXPECT_EQ(c.norm(), 0.0);
}

TEST(NumericGradient, NonFiniteProbeReportsCoordinate)
{
    const auto f = [](const VecX& x) {
        return x[1] > 1.0 ? std::numeric_limits<double>::quiet_NaN() : x.squaredNorm();
    };
    try {
        numeric_gradient(f, vec({0.0, 1.0, 0.0}));
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.coordinate(), 1);
    }
}

TEST(MinimizeBounded, ActiveBound)
{
    const auto f = [](const VecX& x) { return (x[0] - 3.0) * (x[0] - 3.0); };
    const OptimResult r = minimize_bounded(f, vec({0.0}), Bounds{vec({-1.0}), vec({1.0})});
    EXPECT_DOUBLE_EQ(r.x[0], 1.0);
    EXPECT_NEAR(r.f, 4.0, 1e-12);
}

TEST(MinimizeBounded, Rosenbrock)
{
    const OptimResult r = minimize_bounded(rosenbrock, vec({-1.2, 1.0}), Bounds::unbounded(2));
    EXPECT_LT((r.x - vec({1, 1})).norm(), 1e-4);
    EXPECT_LE(r.trace.iterations(), 100);
}

TEST(MinimizeBounded, IdentityBowl)
{
    const auto f = [](const VecX& x) { return 0.5 * (x - vec({1, -2, 3})).squaredNorm(); };
    const OptimResult r = minimize_bounded(f, vec({0, 0, 0}), Bounds::unbounded(3));
    EXPECT_LT((r.x - vec({1, -2, 3})).norm(), 1e-5);
    EXPECT_LE(r.trace.iterations(), 3);
}

TEST(MinimizeBounded, StartOutsideBounds)
{
    const auto f = [](const VecX& x) { return x.squaredNorm(); };
    EXPECT_THROW(minimize_bounded(f, vec({2.0}), Bounds{vec({-1.0}), vec({1.0})}), PreconditionError);
    EXPECT_THROW(minimize_bounded(f, vec({0.0, 0.0}), Bounds{vec({-1.0}), vec({1.0})}), ConfigError);
}

TEST(MinimizeBounded, NonFiniteStart)
{
    const auto f = [](const VecX&) { return std::numeric_limits<double>::infinity(); };
    try {
        minimize_bounded(f, vec({0.0}), Bounds::unbounded(1));
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.coordinate(), -1);
    }
}

TEST(MinimizeBounded, NeverEvaluatesOutsideBounds)
{
    const Bounds b{vec({-1.0, 0.0}), vec({1.0, 2.0})};
    bool outside = false;
    const auto f = [&](const VecX& x) {
        if (!b.contains(x)) outside = true;
        return (x[0] - 5.0) * (x[0] - 5.0) + (x[1] + 3.0) * (x[1] + 3.0) + x[0] * x[1];
    };
    const OptimResult r = minimize_bounded(f, vec({0.0, 1.0}), b);
    EXPECT_FALSE(outside);
    EXPECT_TRUE(b.contains(r.x));
    EXPECT_DOUBLE_EQ(r.x[0], 1.0);
    EXPECT_DOUBLE_EQ(r.x[1], 0.0);
}

TEST(Minimize, RosenbrockAndBowl)
{
    OptimizerConfig cfg;
    cfg.method = OptimMethod::Bfgs;
    const OptimResult r = minimize(rosenbrock, vec({-1.2, 1.0}), cfg);
    EXPECT_LT((r.x - vec({1, 1})).norm(), 1e-4);
    EXPECT_LE(r.trace.iterations(), 100);
    const auto bowl = [](const VecX& x) { return 0.5 * x.squaredNorm(); };
    const OptimResult b = minimize(bowl, vec({0.5, -1.5}), cfg);
    EXPECT_LT(b.x.norm(), 1e-5);
    EXPECT_LE(b.trace.iterations(), 3);
}

TEST(Minimize, StartAtMinimum)
{
    const auto f = [](const VecX& x) { return (x - vec({2, 3})).squaredNorm() + 1.0; };
    const OptimResult r = minimize(f, vec({2, 3}));
    EXPECT_LE(r.trace.iterations(), 1);
    EXPECT_EQ(r.x, vec({2, 3}));
    EXPECT_EQ(r.trace.termination, Termination::ConvergedGrad);
}

TEST(Optimizer, MonotoneTraceAndDeterminism)
{
    const auto f = [](const VecX& x) {
        return std::sin(3.0 * x[0]) + 0.5 * x[0] * x[0] + std::cos(2.0 * x[1]) + 0.3 * x[1] * x[1] + x[0] * x[1] * 0.1;
    };
    for (OptimMethod m : {OptimMethod::Bfgs, OptimMethod::BoundedLbfgs}) {
        OptimizerConfig cfg;
        cfg.method = m;
        const Bounds b{vec({-2, -2}), vec({2, 2})};
        const OptimResult r1 = run_optimizer(f, vec({1.7, -1.1}), b, cfg);
        const OptimResult r2 = run_optimizer(f, vec({1.7, -1.1}), b, cfg);
        ASSERT_GE(r1.trace.iterates.size(), 2u);
        for (std::size_t i = 1; i < r1.trace.iterates.size(); ++i) {
            EXPECT_LE(r1.trace.iterates[i].objective, r1.trace.iterates[i - 1].objective);
        }
        ASSERT_EQ(r1.trace.iterates.size(), r2.trace.iterates.size());
        for (std::size_t i = 0; i < r1.trace.iterates.size(); ++i) {
            EXPECT_EQ(r1.trace.iterates[i].x, r2.trace.iterates[i].x);
            EXPECT_EQ(r1.trace.iterates[i].objective, r2.trace.iterates[i].objective);
        }
        EXPECT_EQ(r1.trace.evaluations, r2.trace.evaluations);
        EXPECT_EQ(r1.f, r1.trace.iterates.back().objective);
    }
}

TEST(Optimizer, InvalidConfig)
{
    OptimizerConfig cfg;
    cfg.max_iters = 0;
    EXPECT_THROW(minimize([](const VecX& x) { return x.squaredNorm(); }, vec({1.0}), cfg), ConfigError);
}

} // namespace
} // namespace plausi
