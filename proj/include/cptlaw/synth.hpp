#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cptlaw/fit.hpp"
#include "cptlaw/law.hpp"
#include "cptlaw/schedule.hpp"

namespace cptlaw {

/// Ground-truth generator spec. truth is evaluated for both validation
/// domains; truth_cpt, when present, replaces it on the cpt side so the two
/// domains can follow different constants.
struct SynthSpec {
    LawParams truth;
    std::optional<LawParams> truth_cpt;
    std::vector<Schedule> schedules;
    /// Optional per-schedule context (replay fraction / model size),
    /// parallel to schedules; missing entries use the defaults.
    std::vector<EvalContext> contexts;
    double noise_sigma = 0.0;  // multiplicative log-normal
    std::uint64_t seed = 42;
    std::int64_t subsample = 10;  // observe every subsample-th step
    double lambda = 0.999;
    bool include_pt_phase = true;
};

/// Evaluates the truth law at every stride-th step of every schedule for
/// both domains and applies seeded noise: observed = true * exp(sigma * z).
Dataset generate(const SynthSpec& spec);

}  // namespace cptlaw
