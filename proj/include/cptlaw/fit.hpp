#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cptlaw/law.hpp"
#include "cptlaw/schedule.hpp"
#include "cptlaw/types.hpp"

namespace cptlaw {

/// One logged training run: a schedule plus observed losses per domain.
struct Run {
    Schedule schedule;
    std::map<Domain, LossSeries> observations;
    double r_cpt = 1.0;
    std::optional<double> N;
};

struct Dataset {
    std::vector<Run> runs;

    /// Throws DataError on step-range violations, nonpositive losses, or
    /// nonmonotone steps.
    void validate() const;
    std::size_t observation_count(std::optional<Domain> domain = {}) const;
};

enum class GradientMode { numeric_central, analytic };

const char* to_string(GradientMode m);
GradientMode gradient_mode_from_string(const std::string& s);

struct FitConfig {
    double huber_delta = 1e-3;  // on log-loss residuals
    int n_starts = 64;
    int max_iterations = 2000;
    std::uint64_t seed = 42;
    bool free_s1_pt = false;  // fit the PT forward area as an unknown
    LawForm form = LawForm::base;
    double epsilon = 0.0;  // fixed exponent of the lr_weighted form
    bool fit_replay = false;
    bool fit_model_size = false;
    GradientMode gradient = GradientMode::numeric_central;
    Domain domain = Domain::pt;  // which domain's observations to fit
    bool joint = false;          // pool both domains into one objective
    bool allow_negative_shift = false;  // leave B unconstrained in sign
    double lambda = 0.999;
};

struct FitResult {
    LawParams params;
    double objective = 0.0;  // final mean Huber value
    std::map<Domain, double> r_squared;
    std::map<Domain, double> huber;
    int start_index = -1;
    bool converged = false;
    std::optional<double> fitted_s1_pt;
    std::vector<double> start_objectives;  // per-start finals, index = start
    std::vector<std::string> warnings;
    double huber_delta = 1e-3;  // echoed config, needed to re-derive metrics
    double lambda = 0.999;
};

struct ObjectiveOptions {
    double lambda = 0.999;
    std::optional<Domain> domain;        // restrict to one domain's observations
    std::optional<double> s1_pt_override;  // free-S1pt workflow
};

/// Mean over observations of Huber_delta(log L_pred - log L_obs).
/// Returns +inf when any prediction is non-finite or nonpositive.
double huber_objective(const LawParams& params, const Dataset& dataset, double delta,
                       const ObjectiveOptions& opts = {});

/// Multi-start quasi-Newton fit per Appendix-C-style protocol: log-domain
/// positivity transforms, seeded log-uniform initializations, deterministic
/// argmin reduction (ties broken by lowest start index).
FitResult fit(const Dataset& dataset, const FitConfig& config);

struct GoodnessReport {
    std::map<Domain, double> huber;      // mean Huber on log losses
    std::map<Domain, double> r_squared;  // on raw losses
};

GoodnessReport goodness(const FitResult& result, const Dataset& dataset);

}  // namespace cptlaw
