#include "cptlaw/hpopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "cptlaw/parallel.hpp"

namespace cptlaw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t clamp64(std::int64_t v, std::int64_t lo, std::int64_t hi) {
    return std::max(lo, std::min(hi, v));
}

// End-of-stage and reference losses for one realized schedule. The reference
// index is where the deltas are anchored (normally the PT/CPT boundary).
struct StageEval {
    double end_pt_loss = 0.0;   // reference loss
    double end_cpt_loss = 0.0;  // final loss
};

StageEval eval_stage(const LawParams& params, const Schedule& sched, std::int64_t ref_index,
                     const EvalContext& ctx, double lambda) {
    AreaOptions aopts;
    aopts.lambda = lambda;
    aopts.lr_weight_epsilon = params.area_weight_epsilon();
    AreaTrace tr = compute_areas(sched, aopts);
    AreaSplit sp = split_areas(tr);

    StageEval ev;
    ev.end_cpt_loss =
        eval_loss(params, sp.s1_pt, sp.s2_pt, sp.s1_cpt.back(), sp.s2_cpt.back(), ctx).total;
    if (ref_index > 0) {
        ev.end_pt_loss = eval_loss(params, tr.s1[static_cast<std::size_t>(ref_index)],
                                   tr.s2[static_cast<std::size_t>(ref_index)], 0.0, 0.0, ctx)
                             .total;
    } else {
        // from-scratch family: no checkpoint to subtract, the objective is
        // the absolute final loss (the argmin is unchanged by the missing
        // knob-independent constant)
        ev.end_pt_loss = 0.0;
    }
    return ev;
}

}  // namespace

void BalanceWeights::validate() const {
    if (!(lambda1 >= 0.0 && lambda1 <= 1.0) || !(lambda2 >= 0.0 && lambda2 <= 1.0))
        throw DataError("balance weights must lie in [0,1]");
    if (std::abs(lambda1 + lambda2 - 1.0) > 1e-12)
        throw DataError("balance weights must sum to 1");
}

const char* to_string(Knob k) {
    switch (k) {
        case Knob::loss_potential: return "loss_potential";
        case Knob::peak_lr: return "peak_lr";
        case Knob::replay_ratio: return "replay_ratio";
        case Knob::cpt_steps: return "cpt_steps";
    }
    return "loss_potential";
}

Knob knob_from_string(const std::string& s) {
    if (s == "loss_potential") return Knob::loss_potential;
    if (s == "peak_lr") return Knob::peak_lr;
    if (s == "replay_ratio") return Knob::replay_ratio;
    if (s == "cpt_steps") return Knob::cpt_steps;
    throw DataError("unknown knob: \"" + s + "\"");
}

Schedule ScheduleTemplate::make_cpt_only(std::int64_t steps) const {
    if (steps < 1) throw DataError("schedule template: cpt steps must be >= 1");
    double peak_c = cpt_peak.value_or(pt_peak);
    double start = rewarm_from_zero || scratch ? 0.0 : loss_potential * pt_peak;
    std::vector<PhaseSpec> phases;
    if (steps == 1) {
        phases.push_back({PhaseKind::cosine, 1, peak_c, 0.0});
    } else {
        std::int64_t warm = clamp64(
            static_cast<std::int64_t>(std::llround(cpt_warmup_fraction * static_cast<double>(steps))),
            cpt_warmup_fraction > 0.0 ? 1 : 0, steps - 1);
        if (warm > 0) phases.push_back({PhaseKind::linear, warm, start, peak_c});
        phases.push_back({PhaseKind::cosine, steps - warm, peak_c, 0.0});
    }
    return build_schedule(std::span<const PhaseSpec>(phases.data(), phases.size()));
}

Schedule ScheduleTemplate::make() const {
    if (!(pt_peak >= 0.0)) throw DataError("schedule template: negative pt_peak");
    if (!(loss_potential >= 0.0 && loss_potential <= 1.0))
        throw DataError("schedule template: loss_potential outside [0,1]");
    Schedule cpt = make_cpt_only(cpt_steps);
    if (scratch) return cpt;

    if (pt_steps < 1) throw DataError("schedule template: pt_steps must be >= 1");
    std::int64_t decay = clamp64(
        static_cast<std::int64_t>(std::llround(pt_decay_fraction * static_cast<double>(pt_steps))),
        pt_decay_fraction > 0.0 ? 1 : 0, pt_steps - 1);
    std::vector<PhaseSpec> phases;
    if (pt_steps - decay > 0)
        phases.push_back({PhaseKind::wsd_stable, pt_steps - decay, pt_peak, pt_peak});
    if (decay > 0)
        phases.push_back({pt_decay_kind, decay, pt_peak, loss_potential * pt_peak});
    Schedule pt = build_schedule(std::span<const PhaseSpec>(phases.data(), phases.size()));
    return concat_pt_cpt(pt, cpt);
}

void KnobSpace::validate() const {
    if (!(lo < hi)) throw DataError("knob space: lo must be < hi");
    if (knob == Knob::loss_potential || knob == Knob::replay_ratio) {
        if (lo < 0.0 || hi > 1.0)
            throw DataError("knob space: loss_potential/replay_ratio range must lie in [0,1]");
    }
    if (knob == Knob::cpt_steps && lo < 1.0) throw DataError("knob space: cpt_steps must be >= 1");
    if (grid_points < 2) throw DataError("knob space: need at least 2 grid points");
}

BalanceBreakdown balance_objective(const LawParams& params_pt, const LawParams& params_cpt,
                                   const BalanceWeights& weights, const Schedule& schedule,
                                   const EvalContext& ctx, double lambda) {
    weights.validate();
    if (schedule.boundary <= 0)
        throw DataError("balance_objective: schedule must contain a PT stage (boundary > 0)");
    if (schedule.boundary >= schedule.length())
        throw DataError("balance_objective: degenerate schedule (no CPT steps)");

    EvalContext cpt_ctx = ctx;
    EvalContext pt_ctx = ctx;
    pt_ctx.domain = Domain::pt;
    cpt_ctx.domain = Domain::cpt;

    StageEval pt_ev = eval_stage(params_pt, schedule, schedule.boundary, pt_ctx, lambda);
    StageEval cpt_ev = eval_stage(params_cpt, schedule, schedule.boundary, cpt_ctx, lambda);

    BalanceBreakdown out;
    out.delta_pt = pt_ev.end_cpt_loss - pt_ev.end_pt_loss;
    out.delta_cpt = cpt_ev.end_cpt_loss - cpt_ev.end_pt_loss;
    out.objective = weights.lambda1 * out.delta_pt + weights.lambda2 * out.delta_cpt;
    return out;
}

OptimumReport optimize_knob(const KnobSpace& space, const BalanceWeights& weights,
                            const LawParams& params_pt, const LawParams& params_cpt,
                            double lambda) {
    space.validate();
    weights.validate();
    const ScheduleTemplate& tmpl = space.schedule_template;

    // For the replay knob the schedule is knob-independent; build it once.
    std::optional<Schedule> fixed_sched;
    if (space.knob == Knob::replay_ratio) fixed_sched = tmpl.make();

    auto candidate = [&](double v) -> BalanceBreakdown {
        ScheduleTemplate t = tmpl;
        EvalContext ctx;
        switch (space.knob) {
            case Knob::loss_potential: t.loss_potential = v; break;
            case Knob::peak_lr: t.cpt_peak = v; break;
            case Knob::replay_ratio: ctx.r_cpt = 1.0 - v; break;
            case Knob::cpt_steps: t.cpt_steps = static_cast<std::int64_t>(std::llround(v)); break;
        }
        const Schedule sched = fixed_sched ? *fixed_sched : t.make();
        // Candidates must share a baseline. The loss-potential knob reshapes
        // the PT decay tail itself, so its deltas are anchored at the
        // pre-decay checkpoint; other knobs anchor at the PT/CPT boundary.
        std::int64_t ref = sched.boundary;
        if (space.knob == Knob::loss_potential && !t.scratch) {
            std::int64_t decay = clamp64(static_cast<std::int64_t>(std::llround(
                                             t.pt_decay_fraction * static_cast<double>(t.pt_steps))),
                                         t.pt_decay_fraction > 0.0 ? 1 : 0, t.pt_steps - 1);
            ref = t.pt_steps - decay;
        }
        EvalContext pt_ctx = ctx, cpt_ctx = ctx;
        pt_ctx.domain = Domain::pt;
        cpt_ctx.domain = Domain::cpt;
        StageEval pt_ev = eval_stage(params_pt, sched, ref, pt_ctx, lambda);
        StageEval cpt_ev = eval_stage(params_cpt, sched, ref, cpt_ctx, lambda);
        BalanceBreakdown bb;
        bb.delta_pt = pt_ev.end_cpt_loss - pt_ev.end_pt_loss;
        bb.delta_cpt = cpt_ev.end_cpt_loss - cpt_ev.end_pt_loss;
        bb.objective = weights.lambda1 * bb.delta_pt + weights.lambda2 * bb.delta_cpt;
        return bb;
    };

    // grid values
    std::vector<double> grid;
    if (space.knob == Knob::cpt_steps) {
        std::int64_t lo = static_cast<std::int64_t>(std::llround(space.lo));
        std::int64_t hi = static_cast<std::int64_t>(std::llround(space.hi));
        if (hi - lo + 1 > 20000)
            throw DataError("optimize_knob: cpt_steps range too large for exhaustive scan");
        for (std::int64_t v = lo; v <= hi; ++v) grid.push_back(static_cast<double>(v));
    } else {
        grid.resize(static_cast<std::size_t>(space.grid_points));
        for (int i = 0; i < space.grid_points; ++i)
            grid[static_cast<std::size_t>(i)] =
                space.lo + (space.hi - space.lo) * static_cast<double>(i) /
                               static_cast<double>(space.grid_points - 1);
    }

    std::vector<BalanceBreakdown> evals(grid.size());
    parallel_for(static_cast<std::int64_t>(grid.size()),
                 [&](std::int64_t i) { evals[static_cast<std::size_t>(i)] = candidate(grid[static_cast<std::size_t>(i)]); });

    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(evals[i].objective))
            throw NumericError("optimize_knob: non-finite objective at knob value " +
                               std::to_string(grid[i]));
        if (evals[i].objective < evals[best].objective) best = i;
    }

    OptimumReport rep;
    rep.curve.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) rep.curve.emplace_back(grid[i], evals[i].objective);

    rep.knob_value = grid[best];
    rep.objective = evals[best].objective;
    rep.delta_pt = evals[best].delta_pt;
    rep.delta_cpt = evals[best].delta_cpt;

    if (space.knob != Knob::cpt_steps) {
        // golden-section refinement between the neighbors of the best grid point
        double a = grid[best > 0 ? best - 1 : best];
        double b = grid[best + 1 < grid.size() ? best + 1 : best];
        if (b > a) {
            const double gr = 0.6180339887498949;
            double c = b - gr * (b - a);
            double d = a + gr * (b - a);
            BalanceBreakdown fc = candidate(c), fd = candidate(d);
            for (int it = 0; it < 120 && (b - a) > 1e-12 * std::max(1.0, std::abs(b)); ++it) {
                if (fc.objective < fd.objective) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = candidate(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = candidate(d);
                }
            }
            double mid = 0.5 * (a + b);
            BalanceBreakdown fm = candidate(mid);
            if (std::isfinite(fm.objective) && fm.objective < rep.objective) {
                rep.knob_value = mid;
                rep.objective = fm.objective;
                rep.delta_pt = fm.delta_pt;
                rep.delta_cpt = fm.delta_cpt;
            }
        }
    }
    return rep;
}

TurningLength turning_length(const LawParams& params_pt, const KnobSpace& space,
                             const EvalContext& ctx, double lambda) {
    if (space.knob != Knob::cpt_steps)
        throw DataError("turning_length: knob space must range over cpt_steps");
    std::int64_t lo = static_cast<std::int64_t>(std::llround(space.lo));
    std::int64_t cap = static_cast<std::int64_t>(std::llround(space.hi));
    if (cap < 1) throw DataError("turning_length: cap must be >= 1");
    lo = std::max<std::int64_t>(1, lo);
    if (lo > cap) throw DataError("turning_length: empty candidate range");

    EvalContext pt_ctx = ctx;
    pt_ctx.domain = Domain::pt;
    auto delta_at = [&](std::int64_t steps) {
        ScheduleTemplate t = space.schedule_template;
        t.cpt_steps = steps;
        Schedule sched = t.make();
        if (sched.boundary <= 0)
            throw DataError("turning_length: template must produce a PT stage");
        StageEval ev = eval_stage(params_pt, sched, sched.boundary, pt_ctx, lambda);
        return ev.end_cpt_loss - ev.end_pt_loss;
    };

    // log-spaced scan, deduplicated to integers
    std::set<std::int64_t> scan;
    const int points = 64;
    for (int i = 0; i < points; ++i) {
        double f = static_cast<double>(i) / static_cast<double>(points - 1);
        double v = std::exp(std::log(static_cast<double>(lo)) +
                            f * (std::log(static_cast<double>(cap)) - std::log(static_cast<double>(lo))));
        scan.insert(clamp64(static_cast<std::int64_t>(std::llround(v)), lo, cap));
    }

    std::int64_t prev = -1;
    for (std::int64_t t : scan) {
        if (delta_at(t) <= 0.0) {
            if (prev < 0) return {true, t};  // nonpositive already at the first candidate
            // smallest integer in (prev, t] with a nonpositive delta
            std::int64_t a = prev, b = t;
            while (a + 1 < b) {
                std::int64_t mid = a + (b - a) / 2;
                if (delta_at(mid) <= 0.0)
                    b = mid;
                else
                    a = mid;
            }
            return {true, b};
        }
        prev = t;
    }
    return {false, 0};
}

CriticalPoint critical_point(const LawParams& params_pt, double s1_pt, double s2_pt,
                             const EvalContext& ctx, std::int64_t cap,
                             const ScheduleTemplate& tmpl, double lambda) {
    if (cap < 1) throw DataError("critical_point: cap must be >= 1");
    EvalContext pt_ctx = ctx;
    pt_ctx.domain = Domain::pt;

    CriticalPoint out;
    out.checkpoint_loss = eval_loss(params_pt, s1_pt, s2_pt, 0.0, 0.0, pt_ctx).total;

    // candidate step counts: exhaustive when small, log grid otherwise
    std::set<std::int64_t> cands;
    if (cap <= 512) {
        for (std::int64_t t = 1; t <= cap; ++t) cands.insert(t);
    } else {
        const int points = 512;
        for (int i = 0; i < points; ++i) {
            double f = static_cast<double>(i) / static_cast<double>(points - 1);
            double v = std::exp(f * std::log(static_cast<double>(cap)));
            cands.insert(clamp64(static_cast<std::int64_t>(std::llround(v)), 1, cap));
        }
    }

    out.infimum_loss = kInf;
    for (std::int64_t t : cands) {
        Schedule cpt = tmpl.make_cpt_only(t);
        AreaOptions aopts;
        aopts.lambda = lambda;
        aopts.lr_weight_epsilon = params_pt.area_weight_epsilon();
        AreaTrace tr = compute_areas(cpt, aopts);
        double final_loss = eval_loss(params_pt, s1_pt, s2_pt, tr.s1.back(), tr.s2.back(), pt_ctx)
                                .total;
        out.infimum_loss = std::min(out.infimum_loss, final_loss);
    }
    out.reachable = out.infimum_loss < out.checkpoint_loss;
    return out;
}

}  // namespace cptlaw
