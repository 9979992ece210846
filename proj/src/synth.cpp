#include "cptlaw/synth.hpp"

#include <cmath>

#include "cptlaw/random.hpp"

namespace cptlaw {

Dataset generate(const SynthSpec& spec) {
    if (spec.subsample < 1) throw DataError("generate: subsample stride must be >= 1");
    if (!(spec.noise_sigma >= 0.0)) throw DataError("generate: noise_sigma must be >= 0");
    if (!spec.contexts.empty() && spec.contexts.size() != spec.schedules.size())
        throw DataError("generate: contexts must be empty or match the schedule count");

    std::mt19937_64 gen(spec.seed);
    Dataset out;
    out.runs.reserve(spec.schedules.size());
    constexpr double kAreaFloor = 1e-12;

    for (std::size_t si = 0; si < spec.schedules.size(); ++si) {
        const Schedule& sched = spec.schedules[si];
        EvalContext base_ctx = spec.contexts.empty() ? EvalContext{} : spec.contexts[si];

        Run run;
        run.schedule = sched;
        run.r_cpt = base_ctx.r_cpt;
        if (base_ctx.N != 1.0) run.N = base_ctx.N;

        for (Domain domain : {Domain::pt, Domain::cpt}) {
            const LawParams& truth =
                domain == Domain::cpt && spec.truth_cpt ? *spec.truth_cpt : spec.truth;
            AreaOptions aopts;
            aopts.lambda = spec.lambda;
            aopts.lr_weight_epsilon = truth.area_weight_epsilon();
            AreaTrace trace = compute_areas(sched, aopts);
            AreaSplit split = split_areas(trace);
            EvalContext ctx = base_ctx;
            ctx.domain = domain;

            LossSeries series;
            const std::int64_t T = trace.steps();
            const std::int64_t b = trace.boundary;
            for (std::int64_t t = spec.subsample; t <= T; t += spec.subsample) {
                double true_loss;
                if (t <= b) {
                    if (!spec.include_pt_phase) continue;
                    double s1 = trace.s1[static_cast<std::size_t>(t)];
                    if (s1 < kAreaFloor) continue;
                    true_loss =
                        eval_loss(truth, s1, trace.s2[static_cast<std::size_t>(t)], 0.0, 0.0, ctx)
                            .total;
                } else {
                    std::size_t i = static_cast<std::size_t>(t - b);
                    if (split.s1_pt + split.s1_cpt[i] < kAreaFloor) continue;
                    true_loss = eval_loss(truth, split.s1_pt, split.s2_pt, split.s1_cpt[i],
                                          split.s2_cpt[i], ctx)
                                    .total;
                }
                double observed = true_loss * std::exp(spec.noise_sigma * normal01(gen));
                series.push_back({t, observed});
            }
            run.observations[domain] = std::move(series);
        }
        out.runs.push_back(std::move(run));
    }
    return out;
}

}  // namespace cptlaw
