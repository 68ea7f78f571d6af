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

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace plausi {

using VecX = Eigen::VectorXd;

enum class OptimMethod { BoundedLbfgs, Bfgs };

struct OptimizerConfig
{
    OptimMethod method = OptimMethod::BoundedLbfgs;
    int max_iters = 100;
    double grad_tol = 1e-5;   ///< infinity norm of the (projected) gradient
    double step_tol = 1e-9;   ///< infinity norm of the accepted step
    /// Relative objective decrease below which an accepted step counts as converged.
    double f_tol = 1e-10;
    double fd_step = 1e-6;    ///< relative central-difference step
    int memory = 10;          ///< history pairs of the limited-memory variant
    /// Infinity-norm length of the very first (steepest-descent) trial step.
    double initial_step = 1.0;
    double armijo = 1e-4;
    int max_backtracks = 40;

    void validate() const
    {
        if (max_iters < 1 || !(grad_tol > 0.0) || !(step_tol > 0.0) || !(f_tol > 0.0) || !(fd_step > 0.0) ||
            memory < 1 || !(initial_step > 0.0)) {
            throw ConfigError("invalid optimizer configuration");
        }
    }
};

/// Per-coordinate box; infinite entries mean unbounded.
struct Bounds
{
    VecX lo;
    VecX hi;

    static Bounds unbounded(Eigen::Index n)
    {
        return {VecX::Constant(n, -std::numeric_limits<double>::infinity()),
                VecX::Constant(n, std::numeric_limits<double>::infinity())};
    }

    bool contains(const VecX& x) const
    {
        return ((x.array() >= lo.array()) && (x.array() <= hi.array())).all();
    }

    VecX project(const VecX& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

enum class Termination { ConvergedGrad, ConvergedStep, MaxIters };

inline const char* to_string(Termination t)
{
    switch (t) {
    case Termination::ConvergedGrad: return "converged-grad";
    case Termination::ConvergedStep: return "converged-step";
    case Termination::MaxIters: return "max-iters";
    }
    return "?";
}

struct OptimIterate
{
    VecX x;
    double objective = 0.0;
    double grad_norm = 0.0;
};

struct OptimTrace
{
    std::vector<OptimIterate> iterates; // iterates[0] is the start point
    Termination termination = Termination::MaxIters;
    long evaluations = 0;

    int iterations() const { return static_cast<int>(iterates.size()) - 1; }
};

struct OptimResult
{
    VecX x;
    double f = 0.0;
    OptimTrace trace;
};

namespace detail {

template <typename F>
double checked_eval(F& f, const VecX& x, long& evals, std::ptrdiff_t coordinate)
{
    ++evals;
    const double v = f(x);
    if (!std::isfinite(v)) {
        throw EvaluationError(coordinate < 0 ? "objective is not finite at the iterate"
                                             : "objective is not finite at a difference probe",
                              coordinate);
    }
    return v;
}

template <typename F>
VecX gradient_impl(F& f, const VecX& x, double fx, double fd_step, const Bounds* bounds, long& evals)
{
    VecX g(x.size());
    VecX probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step * std::max(1.0, std::abs(x(i)));
        const bool up_ok = bounds == nullptr || x(i) + h <= bounds->hi(i);
        const bool down_ok = bounds == nullptr || x(i) - h >= bounds->lo(i);
        if (up_ok && down_ok) {
            probe(i) = x(i) + h;
            const double fp = checked_eval(f, probe, evals, i);
            probe(i) = x(i) - h;
            const double fm = checked_eval(f, probe, evals, i);
            g(i) = (fp - fm) / (2.0 * h);
        } else if (up_ok) {
            probe(i) = x(i) + h;
            g(i) = (checked_eval(f, probe, evals, i) - fx) / h;
        } else if (down_ok) {
            probe(i) = x(i) - h;
            g(i) = (fx - checked_eval(f, probe, evals, i)) / h;
        } else {
            g(i) = 0.0;
        }
        probe(i) = x(i);
    }
    return g;
}

inline double projected_grad_norm(const VecX& x, const VecX& g, const Bounds& b)
{
    double n = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double gi = g(i);
        if ((x(i) <= b.lo(i) && gi > 0.0) || (x(i) >= b.hi(i) && gi < 0.0)) {
            gi = 0.0;
        }
        n = std::max(n, std::abs(gi));
    }
    return n;
}

} // namespace detail

/// Central differences with per-coordinate step fd_step * max(1, |x_i|).
template <typename F>
VecX numeric_gradient(F&& f, const VecX& x, double fd_step = 1e-6)
{
    long evals = 0;
    return detail::gradient_impl(f, x, 0.0, fd_step, nullptr, evals);
}

namespace detail {

// Shared driver: `direction` maps (x, g, free mask) to a search direction; `update`
// receives each accepted (s, y) pair.
template <typename F, typename Direction, typename Update>
OptimResult quasi_newton(F& f, const VecX& x0, const Bounds& bounds, const OptimizerConfig& cfg,
                         Direction&& direction, Update&& update)
{
    cfg.validate();
    if (bounds.lo.size() != x0.size() || bounds.hi.size() != x0.size()) {
        throw ConfigError("bounds dimension does not match the start point");
    }
    if (!bounds.contains(x0)) {
        throw PreconditionError("start point lies outside the bounds");
    }
    OptimResult res;
    OptimTrace& tr = res.trace;
    VecX x = x0;
    double fx = checked_eval(f, x, tr.evaluations, -1);
    VecX g = gradient_impl(f, x, fx, cfg.fd_step, &bounds, tr.evaluations);
    tr.iterates.push_back({x, fx, projected_grad_norm(x, g, bounds)});
    tr.termination = Termination::MaxIters;

    bool first = true;
    for (int it = 0; it < cfg.max_iters; ++it) {
        if (tr.iterates.back().grad_norm <= cfg.grad_tol) {
            tr.termination = Termination::ConvergedGrad;
            break;
        }
        // free variables: not pinned at a bound by the gradient
        Eigen::Array<bool, Eigen::Dynamic, 1> free(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            free(i) = !((x(i) <= bounds.lo(i) && g(i) > 0.0) || (x(i) >= bounds.hi(i) && g(i) < 0.0));
        }
        VecX pg = free.select(g, VecX::Zero(x.size()));
        VecX d;
        if (first) {
            d = -pg * std::min(1.0, cfg.initial_step / pg.cwiseAbs().maxCoeff());
        } else {
            d = direction(g, free);
            d = free.select(d, VecX::Zero(x.size()));
            if (!(g.dot(d) < 0.0)) {
                d = -pg * std::min(1.0, cfg.initial_step / pg.cwiseAbs().maxCoeff());
                update(VecX(), VecX(), true); // reset curvature history
            }
        }

        // backtracking from the full step; the first passing step is the largest
        double alpha = 1.0;
        VecX x_new;
        double f_new = fx;
        bool accepted = false;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
            x_new = bounds.project(x + alpha * d);
            f_new = checked_eval(f, x_new, tr.evaluations, -1);
            if (f_new <= fx + cfg.armijo * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted || f_new > fx) {
            tr.termination = Termination::ConvergedStep;
            break;
        }
        const VecX s = x_new - x;
        const VecX g_new = gradient_impl(f, x_new, f_new, cfg.fd_step, &bounds, tr.evaluations);
        const VecX y = g_new - g;
        const double f_old = fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        tr.iterates.push_back({x, fx, projected_grad_norm(x, g, bounds)});
        update(s, y, false);
        first = false;
        if (s.cwiseAbs().maxCoeff() <= cfg.step_tol ||
            std::abs(f_old - fx) <= cfg.f_tol * std::max({1.0, std::abs(f_old), std::abs(fx)})) {
            tr.termination = tr.iterates.back().grad_norm <= cfg.grad_tol ? Termination::ConvergedGrad
                                                                          : Termination::ConvergedStep;
            break;
        }
    }
    if (tr.termination == Termination::MaxIters && tr.iterates.back().grad_norm <= cfg.grad_tol) {
        tr.termination = Termination::ConvergedGrad;
    }
    res.x = x;
    res.f = fx;
    return res;
}

} // namespace detail

/**
 * Limited-memory quasi-Newton minimization inside a box, derivatives by finite
 * differences. Variables pinned at a bound by their gradient are frozen for the step;
 * the two-loop recursion shapes the direction of the rest and a projected Armijo
 * backtracking line search keeps every evaluation inside the bounds.
 */
template <typename F>
OptimResult minimize_bounded(F&& f, const VecX& x0, const Bounds& bounds, const OptimizerConfig& cfg = {})
{
    std::deque<std::pair<VecX, VecX>> hist;
    const auto direction = [&hist](const VecX& g, const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
        const auto mask = [&free](const VecX& v) { return VecX(free.select(v, VecX::Zero(v.size()))); };
        VecX q = mask(g);
        std::vector<double> alpha(hist.size());
        for (std::size_t i = hist.size(); i-- > 0;) {
            const VecX s = mask(hist[i].first), y = mask(hist[i].second);
            const double sy = s.dot(y);
            if (sy <= 0.0) {
                alpha[i] = 0.0;
                continue;
            }
            alpha[i] = s.dot(q) / sy;
            q -= alpha[i] * y;
        }
        const VecX s_last = mask(hist.back().first), y_last = mask(hist.back().second);
        const double yy = y_last.dot(y_last);
        const double gamma = yy > 0.0 && s_last.dot(y_last) > 0.0 ? s_last.dot(y_last) / yy : 1.0;
        VecX r = gamma * q;
        for (std::size_t i = 0; i < hist.size(); ++i) {
            const VecX s = mask(hist[i].first), y = mask(hist[i].second);
            const double sy = s.dot(y);
            if (sy <= 0.0) {
                continue;
            }
            const double beta = y.dot(r) / sy;
            r += s * (alpha[i] - beta);
        }
        return VecX(-r);
    };
    const int memory = cfg.memory;
    const auto update = [&hist, memory](const VecX& s, const VecX& y, bool reset) {
        if (reset) {
            hist.clear();
            return;
        }
        if (s.dot(y) > 1e-12 * y.squaredNorm()) {
            hist.emplace_back(s, y);
            if (static_cast<int>(hist.size()) > memory) {
                hist.pop_front();
            }
        }
    };
    // without accepted curvature pairs the direction falls back to steepest descent
    const auto guarded = [&](const VecX& g, const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
        if (hist.empty()) {
            return VecX(-free.select(g, VecX::Zero(g.size())));
        }
        return direction(g, free);
    };
    return detail::quasi_newton(f, x0, bounds, cfg, guarded, update);
}

/// Dense-inverse-Hessian BFGS without bounds.
template <typename F>
OptimResult minimize(F&& f, const VecX& x0, const OptimizerConfig& cfg = {})
{
    const Eigen::Index n = x0.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    const auto direction = [&h](const VecX& g, const Eigen::Array<bool, Eigen::Dynamic, 1>&) {
        return VecX(-(h * g));
    };
    const auto update = [&h, &scaled, n](const VecX& s, const VecX& y, bool reset) {
        if (reset) {
            h.setIdentity(n, n);
            scaled = false;
            return;
        }
        const double sy = s.dot(y);
        if (!(sy > 1e-12 * y.squaredNorm())) {
            return;
        }
        if (!scaled) {
            h *= sy / y.squaredNorm();
            scaled = true;
        }
        const double rho = 1.0 / sy;
        const VecX hy = h * y;
        h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    };
    return detail::quasi_newton(f, x0, Bounds::unbounded(n), cfg, direction, update);
}

/// Dispatch on cfg.method; the BFGS path ignores `bounds`.
template <typename F>
OptimResult run_optimizer(F&& f, const VecX& x0, const Bounds& bounds, const OptimizerConfig& cfg)
{
    if (cfg.method == OptimMethod::Bfgs) {
        return minimize(f, x0, cfg);
    }
    return minimize_bounded(f, x0, bounds, cfg);
}

} // namespace plausi
