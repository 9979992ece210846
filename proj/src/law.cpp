#include "cptlaw/law.hpp"

#include <cmath>
#include <string>

namespace cptlaw {

namespace {

constexpr double kAreaFloor = 1e-12;

// sign(s) * |s|^zeta; annealing areas can be negative during re-warmup.
double signed_pow(double s, double zeta) {
    if (zeta == 1.0) return s;
    if (s == 0.0) return 0.0;
    return s < 0.0 ? -std::pow(-s, zeta) : std::pow(s, zeta);
}

void eval_core(const LawParams& params, double s1_pt, double s2_pt, double s1_cpt, double s2_cpt,
               const EvalContext& ctx, LossBreakdown& out) noexcept {
    out.base_power = params.A * std::pow(s1_pt + s1_cpt, -params.alpha);

    double s2_pt_eff = params.form == LawForm::s2_power ? signed_pow(s2_pt, params.zeta1) : s2_pt;
    double s2_cpt_eff =
        params.form == LawForm::s2_power ? signed_pow(s2_cpt, params.zeta2) : s2_cpt;

    double n_g1 = 1.0, n_g2 = 1.0;
    out.size_term = 0.0;
    if (params.model_size) {
        n_g1 = std::pow(ctx.N, params.model_size->gamma1);
        n_g2 = std::pow(ctx.N, params.model_size->gamma2);
        out.size_term = params.model_size->F * std::pow(ctx.N, -params.model_size->gamma3);
    }

    out.anneal_pt = params.C1 * s2_pt_eff * n_g1;
    out.anneal_cpt = params.C2 * s2_cpt_eff * n_g2;

    double shift = params.B * (1.0 - std::pow(1.0 + params.E * s1_cpt, -params.beta));
    if (params.replay) {
        const double r_cpt = ctx.r_cpt;
        const double r = ctx.domain == Domain::pt ? 1.0 - r_cpt : r_cpt;
        out.anneal_cpt *= std::exp(params.replay->a1 * r);
        shift *= ctx.domain == Domain::pt ? 1.0 - std::exp(-params.replay->a2 * r_cpt)
                                          : std::exp(params.replay->a2 * r_cpt) - 1.0;
    }
    out.shift = shift;

    out.total = params.L0 + out.base_power - out.anneal_pt - out.anneal_cpt + out.shift +
                out.size_term;
}

}  // namespace

const char* to_string(LawForm f) {
    switch (f) {
        case LawForm::base: return "base";
        case LawForm::lr_weighted: return "lr_weighted";
        case LawForm::s2_power: return "s2_power";
    }
    return "base";
}

LawForm law_form_from_string(const std::string& s) {
    if (s == "base") return LawForm::base;
    if (s == "lr_weighted") return LawForm::lr_weighted;
    if (s == "s2_power") return LawForm::s2_power;
    throw DataError("unknown law form: \"" + s + "\"");
}

void LawParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw DataError(std::string("law params: ") + name + " must be positive and finite");
    };
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DataError(std::string("law params: ") + name + " must be >= 0 and finite");
    };
    positive(L0, "L0");
    positive(A, "A");
    positive(alpha, "alpha");
    positive(E, "E");
    positive(beta, "beta");
    nonneg(C1, "C1");
    nonneg(C2, "C2");
    // The fitted cpt-domain replay equation carries a negative B; only the
    // plain form insists on positivity.
    if (replay) {
        if (!std::isfinite(B)) throw DataError("law params: B must be finite");
    } else {
        positive(B, "B");
    }
    if (form == LawForm::s2_power) {
        positive(zeta1, "zeta1");
        positive(zeta2, "zeta2");
    }
    if (form == LawForm::lr_weighted && !(epsilon >= 0.0))
        throw DataError("law params: epsilon must be >= 0");
    if (replay) {
        if (!std::isfinite(replay->a1) || !std::isfinite(replay->a2))
            throw DataError("law params: replay terms must be finite");
    }
    if (model_size) {
        if (!std::isfinite(model_size->gamma1) || !std::isfinite(model_size->gamma2) ||
            !std::isfinite(model_size->gamma3) || !std::isfinite(model_size->F))
            throw DataError("law params: model size terms must be finite");
    }
}

double eval_shift(const LawParams& params, double s1_cpt) {
    if (!(s1_cpt >= 0.0)) throw DataError("eval_shift: s1_cpt must be >= 0");
    return params.B * (1.0 - std::pow(1.0 + params.E * s1_cpt, -params.beta));
}

LossBreakdown eval_loss(const LawParams& params, double s1_pt, double s2_pt, double s1_cpt,
                        double s2_cpt, const EvalContext& ctx) {
    if (!std::isfinite(s1_pt) || !std::isfinite(s2_pt) || !std::isfinite(s1_cpt) ||
        !std::isfinite(s2_cpt))
        throw DataError("eval_loss: non-finite area input");
    if (s1_pt + s1_cpt < kAreaFloor)
        throw NumericError("eval_loss: total forward area below 1e-12 (power term singular)");
    if (!params.replay && ctx.r_cpt < 1.0)
        throw DataError("eval_loss: r_cpt < 1 requires replay terms in the parameterization");
    LossBreakdown out;
    eval_core(params, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx, out);
    return out;
}

bool try_eval_loss(const LawParams& params, double s1_pt, double s2_pt, double s1_cpt,
                   double s2_cpt, const EvalContext& ctx, LossBreakdown& out) noexcept {
    if (!std::isfinite(s1_pt) || !std::isfinite(s2_pt) || !std::isfinite(s1_cpt) ||
        !std::isfinite(s2_cpt))
        return false;
    if (s1_pt + s1_cpt < kAreaFloor) return false;
    if (!params.replay && ctx.r_cpt < 1.0) return false;
    eval_core(params, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx, out);
    return true;
}

LossSeries predict_curve(const LawParams& params, const Schedule& schedule,
                         const PredictOptions& opts, const EvalContext& ctx) {
    AreaOptions aopts;
    aopts.lambda = opts.lambda;
    aopts.lr_weight_epsilon = params.area_weight_epsilon();
    AreaTrace trace = compute_areas(schedule, aopts);
    AreaSplit split = split_areas(trace);

    const std::int64_t T = trace.steps();
    const std::int64_t b = trace.boundary;
    LossSeries out;
    out.reserve(static_cast<std::size_t>(T));
    for (std::int64_t t = 1; t <= T; ++t) {
        if (t <= b) {
            if (!opts.include_pt_phase) continue;
            double s1 = trace.s1[static_cast<std::size_t>(t)];
            if (s1 < kAreaFloor) continue;  // zero-LR warmup prefix
            out.push_back(
                {t, eval_loss(params, s1, trace.s2[static_cast<std::size_t>(t)], 0.0, 0.0, ctx)
                        .total});
        } else {
            std::size_t i = static_cast<std::size_t>(t - b);
            if (split.s1_pt + split.s1_cpt[i] < kAreaFloor) continue;
            out.push_back({t, eval_loss(params, split.s1_pt, split.s2_pt, split.s1_cpt[i],
                                        split.s2_cpt[i], ctx)
                                  .total});
        }
    }
    return out;
}

}  // namespace cptlaw
