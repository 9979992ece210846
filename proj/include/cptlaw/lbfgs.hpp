#pragma once

#include <functional>
#include <span>
#include <vector>

namespace cptlaw {

/// Scalar objective over a parameter vector. Must return +inf (not throw)
/// for points outside the computable region.
using ObjectiveFn = std::function<double(std::span<const double>)>;
/// Writes the gradient at x into grad (same length as x).
using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

struct LbfgsOptions {
    int max_iterations = 2000;
    int memory = 10;
    double grad_tol = 1e-10;     // stop when the max-abs gradient entry falls below
    int max_line_search = 40;
};

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;  // gradient tolerance met (line-search stalls leave it false)
};

/// Limited-memory BFGS with a strong-Wolfe line search (bracket + zoom).
/// Deterministic: no internal randomness, evaluation order fixed.
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, const GradientFn& grad,
                           std::vector<double> x0, const LbfgsOptions& opts = {});

}  // namespace cptlaw
