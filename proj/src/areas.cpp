#include "cptlaw/areas.hpp"

#include <cmath>

namespace cptlaw {

namespace {

// Neumaier-compensated accumulator; keeps prefix sums accurate for T >= 1e6.
struct Kahan {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

}  // namespace

AreaTrace compute_areas(const Schedule& schedule, const AreaOptions& opts) {
    if (schedule.length() < 1) throw DataError("compute_areas: empty schedule");
    if (!(opts.lambda > 0.0 && opts.lambda < 1.0))
        throw DataError("compute_areas: lambda must lie in (0,1)");
    if (schedule.boundary < 0 || schedule.boundary > schedule.length())
        throw DataError("compute_areas: boundary out of range");
    for (double e : schedule.etas)
        if (!(e >= 0.0)) throw DataError("compute_areas: negative or non-finite eta");

    const std::int64_t T = schedule.length();
    AreaTrace tr;
    tr.boundary = schedule.boundary;
    tr.lambda = opts.lambda;
    tr.s1.assign(static_cast<std::size_t>(T) + 1, 0.0);
    tr.m.assign(static_cast<std::size_t>(T) + 1, 0.0);
    tr.s2.assign(static_cast<std::size_t>(T) + 1, 0.0);

    Kahan s1, s2;
    double m = 0.0;
    double prev_eta = schedule.etas[0];  // eta_0 := eta_1
    for (std::int64_t t = 1; t <= T; ++t) {
        double eta = schedule.etas[static_cast<std::size_t>(t - 1)];
        if (opts.reset_momentum_at_boundary && t == schedule.boundary + 1 && schedule.boundary > 0) {
            m = 0.0;
            prev_eta = eta;  // fresh eta_0 convention for the CPT stage
        }
        m = opts.lambda * m + (prev_eta - eta);
        s1.add(eta);
        double w = opts.lr_weight_epsilon ? m * std::pow(eta, *opts.lr_weight_epsilon) : m;
        s2.add(w);
        tr.s1[static_cast<std::size_t>(t)] = s1.value();
        tr.m[static_cast<std::size_t>(t)] = m;
        tr.s2[static_cast<std::size_t>(t)] = s2.value();
        prev_eta = eta;
    }
    return tr;
}

AreaTrace compute_areas(const Schedule& schedule, double lambda) {
    AreaOptions opts;
    opts.lambda = lambda;
    return compute_areas(schedule, opts);
}

AreaSplit split_areas(const AreaTrace& trace) {
    const std::int64_t T = trace.steps();
    const std::int64_t b = trace.boundary;
    if (b < 0 || b > T) throw DataError("split_areas: boundary out of range");

    AreaSplit sp;
    sp.s1_pt = trace.s1[static_cast<std::size_t>(b)];
    sp.s2_pt = trace.s2[static_cast<std::size_t>(b)];
    const std::int64_t n_cpt = T - b;
    sp.s1_cpt.resize(static_cast<std::size_t>(n_cpt) + 1);
    sp.s2_cpt.resize(static_cast<std::size_t>(n_cpt) + 1);
    for (std::int64_t t = 0; t <= n_cpt; ++t) {
        sp.s1_cpt[static_cast<std::size_t>(t)] =
            trace.s1[static_cast<std::size_t>(b + t)] - sp.s1_pt;
        sp.s2_cpt[static_cast<std::size_t>(t)] =
            trace.s2[static_cast<std::size_t>(b + t)] - sp.s2_pt;
    }
    return sp;
}

std::vector<double> brute_force_s2(const Schedule& schedule, double lambda,
                                   std::optional<double> lr_weight_epsilon) {
    const std::int64_t T = schedule.length();
    if (T > 10000) throw DataError("brute_force_s2: schedule longer than 10000 steps");
    if (!(lambda > 0.0 && lambda < 1.0)) throw DataError("brute_force_s2: lambda must lie in (0,1)");

    auto eta = [&](std::int64_t i) {
        // eta_0 := eta_1
        return schedule.etas[static_cast<std::size_t>(i < 1 ? 0 : i - 1)];
    };
    std::vector<double> s2(static_cast<std::size_t>(T) + 1, 0.0);
    double acc = 0.0;
    for (std::int64_t i = 1; i <= T; ++i) {
        double m_i = 0.0;
        for (std::int64_t k = 1; k <= i; ++k)
            m_i += (eta(k - 1) - eta(k)) * std::pow(lambda, static_cast<double>(i - k));
        acc += lr_weight_epsilon ? m_i * std::pow(eta(i), *lr_weight_epsilon) : m_i;
        s2[static_cast<std::size_t>(i)] = acc;
    }
    return s2;
}

}  // namespace cptlaw
