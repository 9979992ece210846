#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cptlaw/law.hpp"
#include "cptlaw/schedule.hpp"

namespace cptlaw {

struct BalanceWeights {
    double lambda1 = 0.5;
    double lambda2 = 0.5;

    /// lambda1, lambda2 in [0,1] and summing to 1 within 1e-12.
    void validate() const;
};

enum class Knob { loss_potential, peak_lr, replay_ratio, cpt_steps };

const char* to_string(Knob k);
Knob knob_from_string(const std::string& s);

/// WSD pre-training followed by a re-warm + cosine-anneal CPT stage; the
/// family behind every knob sweep. loss_potential sets the ratio of the PT
/// final LR to its peak.
struct ScheduleTemplate {
    std::int64_t pt_steps = 40000;
    double pt_peak = 2e-4;
    double pt_decay_fraction = 0.2;
    PhaseKind pt_decay_kind = PhaseKind::linear;
    double loss_potential = 0.0;
    std::int64_t cpt_steps = 10000;
    std::optional<double> cpt_peak;  // defaults to pt_peak
    double cpt_warmup_fraction = 0.1;
    bool rewarm_from_zero = false;  // warm the CPT stage from 0 instead of the PT final LR
    bool scratch = false;           // drop the PT stage entirely (boundary 0)

    Schedule make() const;
    /// CPT stage alone (boundary 0), for checkpoint-anchored evaluations.
    Schedule make_cpt_only(std::int64_t steps) const;
};

struct KnobSpace {
    Knob knob = Knob::loss_potential;
    double lo = 0.0;
    double hi = 1.0;
    ScheduleTemplate schedule_template;
    int grid_points = 256;

    void validate() const;
};

struct BalanceBreakdown {
    double objective = 0.0;
    double delta_pt = 0.0;
    double delta_cpt = 0.0;
};

/// Eq.-5-style weighted sum of the signed per-domain loss changes over the
/// CPT stage: delta = L(end of CPT) - L(end of PT). Requires 0 < boundary < T.
BalanceBreakdown balance_objective(const LawParams& params_pt, const LawParams& params_cpt,
                                   const BalanceWeights& weights, const Schedule& schedule,
                                   const EvalContext& ctx = {}, double lambda = 0.999);

struct OptimumReport {
    double knob_value = 0.0;
    double objective = 0.0;
    double delta_pt = 0.0;
    double delta_cpt = 0.0;
    std::vector<std::pair<double, double>> curve;  // (knob, objective) grid samples
};

/// Dense grid scan plus golden-section refinement around the best grid
/// point; integer knobs (cpt_steps) scan exhaustively over the range.
OptimumReport optimize_knob(const KnobSpace& space, const BalanceWeights& weights,
                            const LawParams& params_pt, const LawParams& params_cpt,
                            double lambda = 0.999);

struct TurningLength {
    bool reachable = false;
    std::int64_t steps = 0;
};

/// Smallest CPT step count whose end-of-CPT predicted pt-domain loss returns
/// to the end-of-PT value; log-spaced scan plus integer bisection on the
/// bracket. space.knob must be cpt_steps.
TurningLength turning_length(const LawParams& params_pt, const KnobSpace& space,
                             const EvalContext& ctx = {}, double lambda = 0.999);

struct CriticalPoint {
    bool reachable = false;
    double infimum_loss = 0.0;
    double checkpoint_loss = 0.0;
};

/// Infimum of the final pt-domain loss over full-anneal CPT schedules with
/// step counts up to cap, started from the given checkpoint areas.
CriticalPoint critical_point(const LawParams& params_pt, double s1_pt, double s2_pt,
                             const EvalContext& ctx, std::int64_t cap,
                             const ScheduleTemplate& tmpl = {}, double lambda = 0.999);

}  // namespace cptlaw
