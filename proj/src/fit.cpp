#include "cptlaw/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cptlaw/lbfgs.hpp"
#include "cptlaw/parallel.hpp"
#include "cptlaw/random.hpp"

namespace cptlaw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double huber(double r, double delta) {
    double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_deriv(double r, double delta) {
    if (std::abs(r) <= delta) return r;
    return r > 0.0 ? delta : -delta;
}

// One observation flattened to the area coordinates the law consumes.
struct Obs {
    double s1_pt, s2_pt, s1_cpt, s2_cpt;
    double r_cpt, N;
    double raw_loss, log_loss;
    Domain domain;
};

std::vector<Obs> compile_observations(const Dataset& dataset, double lambda,
                                      std::optional<double> epsilon,
                                      std::optional<Domain> domain_filter, bool free_s1_pt) {
    std::vector<Obs> out;
    for (std::size_t ri = 0; ri < dataset.runs.size(); ++ri) {
        const Run& run = dataset.runs[ri];
        if (free_s1_pt && run.schedule.boundary != 0)
            throw DataError("free_s1_pt fitting requires pure-CPT schedules (boundary 0), run " +
                            std::to_string(ri));
        AreaOptions aopts;
        aopts.lambda = lambda;
        aopts.lr_weight_epsilon = epsilon;
        AreaTrace trace = compute_areas(run.schedule, aopts);
        AreaSplit split = split_areas(trace);
        const std::int64_t b = trace.boundary;
        for (const auto& [domain, series] : run.observations) {
            if (domain_filter && domain != *domain_filter) continue;
            for (const LossPoint& p : series) {
                Obs o;
                if (p.step <= b) {
                    o.s1_pt = trace.s1[static_cast<std::size_t>(p.step)];
                    o.s2_pt = trace.s2[static_cast<std::size_t>(p.step)];
                    o.s1_cpt = 0.0;
                    o.s2_cpt = 0.0;
                } else {
                    std::size_t i = static_cast<std::size_t>(p.step - b);
                    o.s1_pt = split.s1_pt;
                    o.s2_pt = split.s2_pt;
                    o.s1_cpt = split.s1_cpt[i];
                    o.s2_cpt = split.s2_cpt[i];
                }
                o.r_cpt = run.r_cpt;
                o.N = run.N.value_or(1.0);
                o.raw_loss = p.loss;
                o.log_loss = std::log(p.loss);
                o.domain = domain;
                out.push_back(o);
            }
        }
    }
    return out;
}

// ---- parameter layout ------------------------------------------------

enum class PName {
    L0, A, alpha, C1, C2, B, E, beta,   // base law
    zeta1, zeta2,                       // s2_power exponents
    a1, a2,                             // replay
    gamma1, gamma2, gamma3, F,          // model size
    s1_pt_free
};

struct Coord {
    PName name;
    bool log_tf;    // optimize log(p) to keep p positive
    double lo, hi;  // initialization range (raw parameter space)
    bool log_init;
};

std::vector<Coord> build_layout(const FitConfig& cfg) {
    std::vector<Coord> c;
    c.push_back({PName::L0, true, 1.0, 5.0, true});
    c.push_back({PName::A, true, 0.1, 2.0, true});
    c.push_back({PName::alpha, true, 0.1, 1.0, true});
    c.push_back({PName::C1, true, 0.01, 1.0, true});
    c.push_back({PName::C2, true, 0.01, 1.0, true});
    if (cfg.allow_negative_shift)
        c.push_back({PName::B, false, -1.0, 1.0, false});
    else
        c.push_back({PName::B, true, 0.01, 1.0, true});
    c.push_back({PName::E, true, 1.0, 1000.0, true});
    c.push_back({PName::beta, true, 0.1, 2.0, true});
    if (cfg.form == LawForm::s2_power) {
        c.push_back({PName::zeta1, true, 0.5, 2.0, true});
        c.push_back({PName::zeta2, true, 0.5, 2.0, true});
    }
    if (cfg.fit_replay) {
        c.push_back({PName::a1, false, -1.0, 1.0, false});
        c.push_back({PName::a2, false, 0.05, 8.0, true});
    }
    if (cfg.fit_model_size) {
        c.push_back({PName::gamma1, false, 0.0, 0.5, false});
        c.push_back({PName::gamma2, false, 0.0, 0.5, false});
        c.push_back({PName::gamma3, true, 0.05, 1.0, true});
        c.push_back({PName::F, true, 0.1, 1000.0, true});
    }
    if (cfg.free_s1_pt) c.push_back({PName::s1_pt_free, true, 1e-3, 50.0, true});
    return c;
}

struct Decoded {
    LawParams params;
    std::optional<double> s1_pt;
};

Decoded decode(std::span<const double> theta, const std::vector<Coord>& layout,
               const FitConfig& cfg) {
    Decoded d;
    d.params.form = cfg.form;
    d.params.epsilon = cfg.form == LawForm::lr_weighted ? cfg.epsilon : 0.0;
    if (cfg.fit_replay) d.params.replay = ReplayTerms{};
    if (cfg.fit_model_size) d.params.model_size = ModelSizeTerms{};
    for (std::size_t i = 0; i < layout.size(); ++i) {
        double v = layout[i].log_tf ? std::exp(theta[i]) : theta[i];
        switch (layout[i].name) {
            case PName::L0: d.params.L0 = v; break;
            case PName::A: d.params.A = v; break;
            case PName::alpha: d.params.alpha = v; break;
            case PName::C1: d.params.C1 = v; break;
            case PName::C2: d.params.C2 = v; break;
            case PName::B: d.params.B = v; break;
            case PName::E: d.params.E = v; break;
            case PName::beta: d.params.beta = v; break;
            case PName::zeta1: d.params.zeta1 = v; break;
            case PName::zeta2: d.params.zeta2 = v; break;
            case PName::a1: d.params.replay->a1 = v; break;
            case PName::a2: d.params.replay->a2 = v; break;
            case PName::gamma1: d.params.model_size->gamma1 = v; break;
            case PName::gamma2: d.params.model_size->gamma2 = v; break;
            case PName::gamma3: d.params.model_size->gamma3 = v; break;
            case PName::F: d.params.model_size->F = v; break;
            case PName::s1_pt_free: d.s1_pt = v; break;
        }
    }
    return d;
}

double objective_over(const std::vector<Obs>& obs, const LawParams& params,
                      std::optional<double> s1_pt_override, double delta) {
    if (obs.empty()) return kInf;
    double acc = 0.0;
    LossBreakdown bd;
    for (const Obs& o : obs) {
        EvalContext ctx{o.r_cpt, o.N, o.domain};
        double s1pt = s1_pt_override ? *s1_pt_override : o.s1_pt;
        if (!try_eval_loss(params, s1pt, o.s2_pt, o.s1_cpt, o.s2_cpt, ctx, bd)) return kInf;
        if (!(bd.total > 0.0) || !std::isfinite(bd.total)) return kInf;
        acc += huber(std::log(bd.total) - o.log_loss, delta);
    }
    return acc / static_cast<double>(obs.size());
}

// Analytic d(total)/d(raw param) for every layout coordinate, evaluated at
// one observation. Matches eval_core term by term.
void accumulate_analytic(const std::vector<Coord>& layout, const LawParams& p, const Obs& o,
                         std::optional<double> s1_pt_override, double huber_scale,
                         std::span<double> grad) {
    const double s1pt = s1_pt_override ? *s1_pt_override : o.s1_pt;
    const double P = s1pt + o.s1_cpt;
    const double base = p.A * std::pow(P, -p.alpha);

    auto spow = [](double s, double z) {
        if (z == 1.0) return s;
        if (s == 0.0) return 0.0;
        return s < 0.0 ? -std::pow(-s, z) : std::pow(s, z);
    };
    const bool power_form = p.form == LawForm::s2_power;
    const double g1 = power_form ? spow(o.s2_pt, p.zeta1) : o.s2_pt;
    const double g2 = power_form ? spow(o.s2_cpt, p.zeta2) : o.s2_cpt;

    double n1 = 1.0, n2 = 1.0, size = 0.0;
    if (p.model_size) {
        n1 = std::pow(o.N, p.model_size->gamma1);
        n2 = std::pow(o.N, p.model_size->gamma2);
        size = p.model_size->F * std::pow(o.N, -p.model_size->gamma3);
    }

    double R = 1.0, r = 0.0;
    double M = 1.0, dM_da2 = 0.0;
    const double Q = 1.0 + p.E * o.s1_cpt;
    const double K = 1.0 - std::pow(Q, -p.beta);
    if (p.replay) {
        const double rc = o.r_cpt;
        r = o.domain == Domain::pt ? 1.0 - rc : rc;
        R = std::exp(p.replay->a1 * r);
        if (o.domain == Domain::pt) {
            M = 1.0 - std::exp(-p.replay->a2 * rc);
            dM_da2 = rc * std::exp(-p.replay->a2 * rc);
        } else {
            M = std::exp(p.replay->a2 * rc) - 1.0;
            dM_da2 = rc * std::exp(p.replay->a2 * rc);
        }
    }
    const double anneal_cpt = p.C2 * g2 * n2 * R;

    for (std::size_t i = 0; i < layout.size(); ++i) {
        double d = 0.0;
        switch (layout[i].name) {
            case PName::L0: d = 1.0; break;
            case PName::A: d = base / p.A; break;
            case PName::alpha: d = -base * std::log(P); break;
            case PName::C1: d = -g1 * n1; break;
            case PName::C2: d = -g2 * n2 * R; break;
            case PName::B: d = K * M; break;
            case PName::E:
                d = p.B * M * p.beta * std::pow(Q, -p.beta - 1.0) * o.s1_cpt;
                break;
            case PName::beta: d = p.B * M * std::pow(Q, -p.beta) * std::log(Q); break;
            case PName::zeta1:
                d = o.s2_pt == 0.0 ? 0.0 : -p.C1 * n1 * g1 * std::log(std::abs(o.s2_pt));
                break;
            case PName::zeta2:
                d = o.s2_cpt == 0.0 ? 0.0 : -p.C2 * n2 * R * g2 * std::log(std::abs(o.s2_cpt));
                break;
            case PName::a1: d = -anneal_cpt * r; break;
            case PName::a2: d = p.B * K * dM_da2; break;
            case PName::gamma1: d = -p.C1 * g1 * n1 * std::log(o.N); break;
            case PName::gamma2: d = -anneal_cpt * std::log(o.N); break;
            case PName::gamma3: d = -size * std::log(o.N); break;
            case PName::F: d = p.model_size ? std::pow(o.N, -p.model_size->gamma3) : 0.0; break;
            case PName::s1_pt_free: d = -p.alpha * base / P; break;
        }
        grad[i] += huber_scale * d;
    }
}

}  // namespace

const char* to_string(GradientMode m) {
    return m == GradientMode::numeric_central ? "numeric-central" : "analytic";
}

GradientMode gradient_mode_from_string(const std::string& s) {
    if (s == "numeric-central") return GradientMode::numeric_central;
    if (s == "analytic") return GradientMode::analytic;
    throw DataError("unknown gradient mode: \"" + s + "\"");
}

void Dataset::validate() const {
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const Run& run = runs[ri];
        const std::int64_t T = run.schedule.length();
        if (T < 1) throw DataError("run " + std::to_string(ri) + ": empty schedule");
        if (run.schedule.boundary < 0 || run.schedule.boundary > T)
            throw DataError("run " + std::to_string(ri) + ": boundary out of range");
        if (!(run.r_cpt >= 0.0 && run.r_cpt <= 1.0))
            throw DataError("run " + std::to_string(ri) + ": r_cpt outside [0,1]");
        if (run.N && !(*run.N > 0.0))
            throw DataError("run " + std::to_string(ri) + ": N must be positive");
        for (const auto& [domain, series] : run.observations) {
            std::int64_t prev = 0;
            for (const LossPoint& p : series) {
                if (p.step < 1 || p.step > T)
                    throw DataError("run " + std::to_string(ri) + " domain " +
                                    to_string(domain) + ": step " + std::to_string(p.step) +
                                    " outside [1, " + std::to_string(T) + "]");
                if (p.step <= prev)
                    throw DataError("run " + std::to_string(ri) + " domain " +
                                    to_string(domain) + ": steps not strictly increasing");
                if (!(p.loss > 0.0) || !std::isfinite(p.loss))
                    throw DataError("run " + std::to_string(ri) + " domain " +
                                    to_string(domain) + ": nonpositive loss at step " +
                                    std::to_string(p.step));
                prev = p.step;
            }
        }
    }
}

std::size_t Dataset::observation_count(std::optional<Domain> domain) const {
    std::size_t n = 0;
    for (const Run& run : runs)
        for (const auto& [d, series] : run.observations)
            if (!domain || d == *domain) n += series.size();
    return n;
}

double huber_objective(const LawParams& params, const Dataset& dataset, double delta,
                       const ObjectiveOptions& opts) {
    if (!(delta > 0.0)) throw DataError("huber_objective: delta must be positive");
    dataset.validate();
    auto obs = compile_observations(dataset, opts.lambda, params.area_weight_epsilon(),
                                    opts.domain, opts.s1_pt_override.has_value());
    if (obs.empty()) throw DataError("huber_objective: no observations");
    return objective_over(obs, params, opts.s1_pt_override, delta);
}

FitResult fit(const Dataset& dataset, const FitConfig& config) {
    if (!(config.huber_delta > 0.0)) throw DataError("fit: huber_delta must be positive");
    if (config.n_starts < 1) throw DataError("fit: n_starts must be >= 1");
    if (config.max_iterations < 1) throw DataError("fit: max_iterations must be >= 1");
    dataset.validate();

    std::optional<double> epsilon;
    if (config.form == LawForm::lr_weighted) epsilon = config.epsilon;
    std::optional<Domain> filter;
    if (!config.joint) filter = config.domain;

    auto obs = compile_observations(dataset, config.lambda, epsilon, filter, config.free_s1_pt);
    if (obs.empty()) throw DataError("fit: no observations for the requested domain");

    const auto layout = build_layout(config);
    const std::size_t dim = layout.size();
    FitResult result;
    result.huber_delta = config.huber_delta;
    result.lambda = config.lambda;
    if (obs.size() < dim)
        throw DataError("fit: dataset too small (" + std::to_string(obs.size()) +
                        " observations < " + std::to_string(dim) + " parameters)");
    if (obs.size() < 8 * dim)
        result.warnings.push_back("fewer than 8 observations per fitted parameter (" +
                                  std::to_string(obs.size()) + "/" + std::to_string(dim) + ")");

    // All starting points drawn up front so parallel execution cannot
    // perturb the random sequence.
    std::mt19937_64 gen(config.seed);
    std::vector<std::vector<double>> starts(static_cast<std::size_t>(config.n_starts));
    for (auto& x0 : starts) {
        x0.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const Coord& c = layout[j];
            double raw = c.log_init ? log_uniform(gen, c.lo, c.hi) : uniform(gen, c.lo, c.hi);
            x0[j] = c.log_tf ? std::log(raw) : raw;
        }
    }

    auto eval_theta = [&](std::span<const double> theta) {
        Decoded d = decode(theta, layout, config);
        return objective_over(obs, d.params, d.s1_pt, config.huber_delta);
    };

    GradientFn grad_fn;
    if (config.gradient == GradientMode::numeric_central) {
        grad_fn = [&](std::span<const double> theta, std::span<double> g) {
            std::vector<double> probe(theta.begin(), theta.end());
            for (std::size_t j = 0; j < probe.size(); ++j) {
                double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
                probe[j] = theta[j] + h;
                double fp = eval_theta(probe);
                probe[j] = theta[j] - h;
                double fm = eval_theta(probe);
                probe[j] = theta[j];
                if (std::isfinite(fp) && std::isfinite(fm))
                    g[j] = (fp - fm) / (2.0 * h);
                else if (std::isfinite(fp) || std::isfinite(fm)) {
                    double f0 = eval_theta(probe);
                    g[j] = std::isfinite(fp) ? (fp - f0) / h : (f0 - fm) / h;
                } else
                    g[j] = 0.0;
            }
        };
    } else {
        grad_fn = [&](std::span<const double> theta, std::span<double> g) {
            Decoded d = decode(theta, layout, config);
            std::fill(g.begin(), g.end(), 0.0);
            LossBreakdown bd;
            for (const Obs& o : obs) {
                EvalContext ctx{o.r_cpt, o.N, o.domain};
                double s1pt = d.s1_pt ? *d.s1_pt : o.s1_pt;
                if (!try_eval_loss(d.params, s1pt, o.s2_pt, o.s1_cpt, o.s2_cpt, ctx, bd) ||
                    !(bd.total > 0.0)) {
                    std::fill(g.begin(), g.end(), 0.0);
                    return;  // outside the computable region; objective is +inf there
                }
                double r = std::log(bd.total) - o.log_loss;
                double scale = huber_deriv(r, config.huber_delta) / bd.total;
                accumulate_analytic(layout, d.params, o, d.s1_pt, scale, g);
            }
            double inv = 1.0 / static_cast<double>(obs.size());
            for (double& v : g) v *= inv;
            // chain rule through the log transforms
            for (std::size_t j = 0; j < layout.size(); ++j)
                if (layout[j].log_tf) g[j] *= std::exp(theta[j]);
        };
    }

    struct StartOutcome {
        double f = kInf;
        std::vector<double> x;
        bool converged = false;
    };
    std::vector<StartOutcome> outcomes(starts.size());
    LbfgsOptions lopts;
    lopts.max_iterations = config.max_iterations;
    parallel_for(static_cast<std::int64_t>(starts.size()), [&](std::int64_t i) {
        LbfgsResult r = lbfgs_minimize(eval_theta, grad_fn, starts[static_cast<std::size_t>(i)],
                                       lopts);
        outcomes[static_cast<std::size_t>(i)] = {r.f, std::move(r.x), r.converged};
    });

    int best = -1;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        result.start_objectives.push_back(outcomes[i].f);
        if (std::isfinite(outcomes[i].f) && (best < 0 || outcomes[i].f < outcomes[static_cast<std::size_t>(best)].f))
            best = static_cast<int>(i);
    }
    if (best < 0) throw NumericError("fit: all starts diverged (non-finite objective)");

    const StartOutcome& win = outcomes[static_cast<std::size_t>(best)];
    Decoded d = decode(win.x, layout, config);
    result.params = d.params;
    result.objective = win.f;
    result.start_index = best;
    result.converged = win.converged;
    result.fitted_s1_pt = d.s1_pt;

    GoodnessReport rep = goodness(result, dataset);
    result.huber = rep.huber;
    result.r_squared = rep.r_squared;
    return result;
}

GoodnessReport goodness(const FitResult& result, const Dataset& dataset) {
    dataset.validate();
    GoodnessReport rep;
    for (Domain domain : {Domain::pt, Domain::cpt}) {
        auto obs = compile_observations(dataset, result.lambda,
                                        result.params.area_weight_epsilon(), domain,
                                        result.fitted_s1_pt.has_value());
        if (obs.empty()) continue;
        if (obs.size() < 2)
            throw DataError(std::string("goodness: fewer than 2 observations for domain ") +
                            to_string(domain));
        double mean = 0.0;
        for (const Obs& o : obs) mean += o.raw_loss;
        mean /= static_cast<double>(obs.size());
        double ss_res = 0.0, ss_tot = 0.0, hub = 0.0;
        LossBreakdown bd;
        for (const Obs& o : obs) {
            EvalContext ctx{o.r_cpt, o.N, o.domain};
            double s1pt = result.fitted_s1_pt ? *result.fitted_s1_pt : o.s1_pt;
            if (!try_eval_loss(result.params, s1pt, o.s2_pt, o.s1_cpt, o.s2_cpt, ctx, bd) ||
                !(bd.total > 0.0))
                throw NumericError("goodness: non-evaluable prediction");
            ss_res += (bd.total - o.raw_loss) * (bd.total - o.raw_loss);
            ss_tot += (o.raw_loss - mean) * (o.raw_loss - mean);
            hub += huber(std::log(bd.total) - o.log_loss, result.huber_delta);
        }
        rep.huber[domain] = hub / static_cast<double>(obs.size());
        if (ss_tot == 0.0)
            rep.r_squared[domain] = ss_res == 0.0 ? 1.0 : -kInf;
        else
            rep.r_squared[domain] = 1.0 - ss_res / ss_tot;
    }
    return rep;
}

}  // namespace cptlaw
