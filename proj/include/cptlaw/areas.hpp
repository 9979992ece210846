#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cptlaw/schedule.hpp"
#include "cptlaw/types.hpp"

namespace cptlaw {

struct AreaOptions {
    /// Momentum decay of the annealing area; fixed configuration, not fitted.
    double lambda = 0.999;
    /// When set, the accumulated annealing area weights each momentum term by
    /// eta^epsilon (the LR-weighted S2 form). Unset = plain S2.
    std::optional<double> lr_weight_epsilon;
    /// Restart the momentum recurrence at the PT/CPT boundary instead of
    /// carrying it across (ablation switch; default carries).
    bool reset_momentum_at_boundary = false;
};

/// Per-step cumulative areas. Vectors have length T+1; index t holds the
/// value after step t, index 0 is the pre-training state (all zeros).
struct AreaTrace {
    std::vector<double> s1;  // forward area, prefix sum of eta
    std::vector<double> m;   // momentum m_t = lambda*m_{t-1} + (eta_{t-1} - eta_t)
    std::vector<double> s2;  // annealing area, prefix sum of m (or m*eta^eps)
    std::int64_t boundary = 0;
    double lambda = 0.999;

    std::int64_t steps() const { return static_cast<std::int64_t>(s1.size()) - 1; }
};

/// PT-stage scalars plus CPT-stage offset sequences. s1_cpt[t] is the forward
/// area accumulated during the first t CPT steps (index 0 = 0).
struct AreaSplit {
    double s1_pt = 0.0;
    double s2_pt = 0.0;
    std::vector<double> s1_cpt;
    std::vector<double> s2_cpt;

    std::int64_t cpt_steps() const { return static_cast<std::int64_t>(s1_cpt.size()) - 1; }
};

/// Single O(T) pass over the schedule using the momentum recurrence with
/// eta_0 := eta_1 (the first step never contributes a difference).
AreaTrace compute_areas(const Schedule& schedule, const AreaOptions& opts = {});
AreaTrace compute_areas(const Schedule& schedule, double lambda);

AreaSplit split_areas(const AreaTrace& trace);

/// Literal double-sum evaluation of the annealing area, O(T^2); verification
/// oracle for compute_areas. Returns a vector of length T+1, index = step.
std::vector<double> brute_force_s2(const Schedule& schedule, double lambda,
                                   std::optional<double> lr_weight_epsilon = {});

}  // namespace cptlaw
