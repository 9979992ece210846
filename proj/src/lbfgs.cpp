#include "cptlaw/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace cptlaw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kC1 = 1e-4;  // sufficient decrease
constexpr double kC2 = 0.9;   // curvature

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct Pair {
    std::vector<double> s, y;
    double rho;
};

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, const GradientFn& grad, std::vector<double> x0,
                           const LbfgsOptions& opts) {
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);
    res.f = f(res.x);
    if (!std::isfinite(res.f)) {
        res.f = kInf;
        return res;
    }

    std::vector<double> g(n), g_new(n), d(n), x_new(n);
    grad(res.x, g);

    std::deque<Pair> mem;
    std::vector<double> q(n), alpha_buf;

    // phi(a) = f(x + a*d); leaves the trial point in x_new
    auto phi = [&](double a) {
        for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + a * d[i];
        double v = f(x_new);
        return std::isfinite(v) ? v : kInf;
    };
    // gradient at the point currently held in x_new; returns phi'(a)
    auto dphi_here = [&]() {
        grad(x_new, g_new);
        return dot(g_new, d);
    };

    for (int it = 0; it < opts.max_iterations; ++it) {
        res.iterations = it;
        if (max_abs(g) <= opts.grad_tol) {
            res.converged = true;
            return res;
        }

        // two-loop recursion: d = -H*g
        q.assign(g.begin(), g.end());
        alpha_buf.assign(mem.size(), 0.0);
        for (std::size_t k = mem.size(); k-- > 0;) {
            const Pair& p = mem[k];
            alpha_buf[k] = p.rho * dot(p.s, q);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alpha_buf[k] * p.y[i];
        }
        if (!mem.empty()) {
            const Pair& last = mem.back();
            double gamma = dot(last.s, last.y) / dot(last.y, last.y);
            for (double& v : q) v *= gamma;
        }
        for (std::size_t k = 0; k < mem.size(); ++k) {
            const Pair& p = mem[k];
            double beta = p.rho * dot(p.y, q);
            for (std::size_t i = 0; i < n; ++i) q[i] += (alpha_buf[k] - beta) * p.s[i];
        }
        for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];

        double dphi0 = dot(g, d);
        if (!(dphi0 < 0.0)) {  // not a descent direction; fall back to steepest descent
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            dphi0 = dot(g, d);
            mem.clear();
            if (!(dphi0 < 0.0)) return res;  // gradient exactly zero
        }

        const double phi0 = res.f;
        double accepted_a = -1.0, accepted_phi = 0.0;
        bool grad_ready = false;  // g_new holds the gradient at the accepted point

        auto zoom = [&](double lo, double phi_lo, double hi) {
            for (int j = 0; j < opts.max_line_search; ++j) {
                double aj = 0.5 * (lo + hi);
                double pj = phi(aj);
                if (pj > phi0 + kC1 * aj * dphi0 || pj >= phi_lo) {
                    hi = aj;
                    continue;
                }
                double dj = dphi_here();
                if (std::abs(dj) <= -kC2 * dphi0) {
                    accepted_a = aj;
                    accepted_phi = pj;
                    grad_ready = true;
                    return;
                }
                if (dj * (hi - lo) >= 0.0) hi = lo;
                lo = aj;
                phi_lo = pj;
            }
            // Wolfe miss: keep the best sufficient-decrease point seen
            if (phi_lo < phi0) {
                accepted_a = lo;
                accepted_phi = phi_lo;
                grad_ready = false;
            }
        };

        double a_prev = 0.0, phi_prev = phi0;
        double a = 1.0;
        for (int ls = 0; ls < opts.max_line_search && accepted_a < 0.0; ++ls) {
            double pa = phi(a);
            if (!std::isfinite(pa)) {
                a = a_prev + 0.5 * (a - a_prev);  // shrink toward the last finite point
                if (a - a_prev < 1e-20) break;
                continue;
            }
            if (pa > phi0 + kC1 * a * dphi0 || (ls > 0 && pa >= phi_prev)) {
                zoom(a_prev, phi_prev, a);
                break;
            }
            double da = dphi_here();
            if (std::abs(da) <= -kC2 * dphi0) {
                accepted_a = a;
                accepted_phi = pa;
                grad_ready = true;
                break;
            }
            if (da >= 0.0) {
                zoom(a, pa, a_prev);
                break;
            }
            a_prev = a;
            phi_prev = pa;
            a = std::min(2.0 * a, 1e10);
        }

        if (accepted_a < 0.0) return res;  // stalled; res holds the best point found

        for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + accepted_a * d[i];
        if (!grad_ready) grad(x_new, g_new);

        Pair pr;
        pr.s.resize(n);
        pr.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            pr.s[i] = x_new[i] - res.x[i];
            pr.y[i] = g_new[i] - g[i];
        }
        double sy = dot(pr.s, pr.y);
        if (sy > 1e-12 * std::sqrt(dot(pr.s, pr.s)) * std::sqrt(dot(pr.y, pr.y))) {
            pr.rho = 1.0 / sy;
            mem.push_back(std::move(pr));
            if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
        }

        res.x.swap(x_new);
        g.swap(g_new);
        res.f = accepted_phi;
    }
    res.converged = max_abs(g) <= opts.grad_tol;
    return res;
}

}  // namespace cptlaw
