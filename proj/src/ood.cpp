#include "cptlaw/ood.hpp"

#include <cmath>
#include <string>

namespace cptlaw {

namespace {

void check_aligned(const LossSeries& a, const LossSeries& b, const char* what) {
    if (a.size() != b.size())
        throw DataError(std::string("ood: series length mismatch (") + what + ")");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].step != b[i].step)
            throw DataError(std::string("ood: step mismatch at index ") + std::to_string(i) +
                            " (" + what + ")");
}

}  // namespace

OodCoeffs fit_ood(const LossSeries& l_pt, const LossSeries& l_cpt, const LossSeries& l_ood,
                  const OodOptions& opts) {
    check_aligned(l_pt, l_cpt, "pt vs cpt");
    check_aligned(l_pt, l_ood, "pt vs ood");
    const std::size_t n = l_pt.size();
    if (n < 2) throw DataError("ood: need at least 2 aligned observations");

    // normal equations of the 2-column regression
    double sxx = 0.0, sxy = 0.0, syy = 0.0, sxz = 0.0, syz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = l_pt[i].loss, y = l_cpt[i].loss, z = l_ood[i].loss;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * z;
        syz += y * z;
    }

    // condition number of [[sxx, sxy], [sxy, syy]] via its eigenvalues
    double tr = sxx + syy;
    double disc = std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
    double eig_max = 0.5 * (tr + disc);
    double eig_min = 0.5 * (tr - disc);
    if (!(eig_min > 0.0) || eig_max / eig_min > opts.condition_limit)
        throw DataError("ood: regressors are collinear (ill-conditioned normal equations)");

    double det = sxx * syy - sxy * sxy;
    OodCoeffs c;
    c.lambda1p = (syy * sxz - sxy * syz) / det;
    c.lambda2p = (sxx * syz - sxy * sxz) / det;

    if (opts.nonnegative && (c.lambda1p < 0.0 || c.lambda2p < 0.0)) {
        // best single-axis solutions
        double l1 = std::max(0.0, sxz / sxx);
        double l2 = std::max(0.0, syz / syy);
        auto rss = [&](double a, double b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double r = a * l_pt[i].loss + b * l_cpt[i].loss - l_ood[i].loss;
                s += r * r;
            }
            return s;
        };
        c = rss(l1, 0.0) <= rss(0.0, l2) ? OodCoeffs{l1, 0.0, 0.0} : OodCoeffs{0.0, l2, 0.0};
    }

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = c.lambda1p * l_pt[i].loss + c.lambda2p * l_cpt[i].loss - l_ood[i].loss;
        ss += r * r;
    }
    c.residual_rmse = std::sqrt(ss / static_cast<double>(n));
    return c;
}

LossSeries predict_ood(const OodCoeffs& coeffs, const LossSeries& l_pt, const LossSeries& l_cpt) {
    check_aligned(l_pt, l_cpt, "pt vs cpt");
    LossSeries out;
    out.reserve(l_pt.size());
    for (std::size_t i = 0; i < l_pt.size(); ++i)
        out.push_back({l_pt[i].step,
                       coeffs.lambda1p * l_pt[i].loss + coeffs.lambda2p * l_cpt[i].loss});
    return out;
}

}  // namespace cptlaw
