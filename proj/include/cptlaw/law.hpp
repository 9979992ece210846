#pragma once

#include <optional>

#include "cptlaw/areas.hpp"
#include "cptlaw/schedule.hpp"
#include "cptlaw/types.hpp"

namespace cptlaw {

/// Shape of the annealing-area contribution.
enum class LawForm { base, lr_weighted, s2_power };

const char* to_string(LawForm f);
LawForm law_form_from_string(const std::string& s);

/// Replay-ratio multipliers: the CPT annealing term is scaled by e^{a1*r}
/// (r = r_pt for the pt domain, r_cpt for the cpt domain) and the shift term
/// by (1 - e^{-a2*r_cpt}) resp. (e^{a2*r_cpt} - 1).
struct ReplayTerms {
    double a1 = 0.0;
    double a2 = 0.0;
    friend bool operator==(const ReplayTerms&, const ReplayTerms&) = default;
};

/// Model-size scaling: annealing terms gain N^gamma1 / N^gamma2 and the loss
/// gains an additive F * N^{-gamma3}.
struct ModelSizeTerms {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
    double F = 0.0;
    friend bool operator==(const ModelSizeTerms&, const ModelSizeTerms&) = default;
};

struct LawParams {
    double L0 = 3.0;
    double A = 0.5;
    double alpha = 0.5;
    double C1 = 0.1;
    double C2 = 0.1;
    double B = 0.1;
    double E = 100.0;
    double beta = 0.5;

    LawForm form = LawForm::base;
    double epsilon = 0.0;  // lr_weighted: S2 accumulates m * eta^epsilon
    double zeta1 = 1.0;    // s2_power exponents on the PT / CPT annealing areas
    double zeta2 = 1.0;

    std::optional<ReplayTerms> replay;
    std::optional<ModelSizeTerms> model_size;

    /// Enforces the parameter-domain invariants (positivity etc.). Evaluation
    /// itself accepts any finite values so tests can probe degenerate regions.
    void validate() const;

    /// Epsilon the area pass must use for this parameterization, if any.
    std::optional<double> area_weight_epsilon() const {
        if (form == LawForm::lr_weighted) return epsilon;
        return std::nullopt;
    }

    friend bool operator==(const LawParams&, const LawParams&) = default;
};

struct EvalContext {
    double r_cpt = 1.0;  // CPT-data fraction of the CPT-stage mixture
    double N = 1.0;      // non-embedding parameter count
    Domain domain = Domain::pt;
};

struct LossBreakdown {
    double total = 0.0;
    double base_power = 0.0;  // A * (S1_pt + S1_cpt)^-alpha
    double anneal_pt = 0.0;   // subtracted
    double anneal_cpt = 0.0;  // subtracted
    double shift = 0.0;
    double size_term = 0.0;
};

/// Distribution-shift term B*(1 - (1 + E*s1_cpt)^-beta); zero at zero area,
/// monotone in s1_cpt, bounded by B.
double eval_shift(const LawParams& params, double s1_cpt);

/// Evaluates the loss law at one point of area space. Throws NumericError
/// when the total forward area is below 1e-12 (the power term is singular).
LossBreakdown eval_loss(const LawParams& params, double s1_pt, double s2_pt, double s1_cpt,
                        double s2_cpt, const EvalContext& ctx = {});

/// Non-throwing variant for optimizer inner loops; returns false instead of
/// throwing on singular area, non-finite inputs, or a missing replay block.
bool try_eval_loss(const LawParams& params, double s1_pt, double s2_pt, double s1_cpt,
                   double s2_cpt, const EvalContext& ctx, LossBreakdown& out) noexcept;

struct PredictOptions {
    double lambda = 0.999;
    bool include_pt_phase = true;
    /// PT steps whose forward area is still below the singularity floor are
    /// skipped rather than emitted as infinities.
};

/// Areas -> split -> law at every step of the schedule.
LossSeries predict_curve(const LawParams& params, const Schedule& schedule,
                         const PredictOptions& opts = {}, const EvalContext& ctx = {});

}  // namespace cptlaw
