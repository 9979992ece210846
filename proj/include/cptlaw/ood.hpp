#pragma once

#include "cptlaw/types.hpp"

namespace cptlaw {

/// Coefficients of the two-basis combination L_ood = l1 * L_pt + l2 * L_cpt.
struct OodCoeffs {
    double lambda1p = 0.0;
    double lambda2p = 0.0;
    double residual_rmse = 0.0;
};

struct OodOptions {
    bool nonnegative = false;  // clamp negative coefficients and re-solve
    double condition_limit = 1e8;
};

/// Ordinary least squares over step-aligned series. Throws DataError on
/// misaligned steps, fewer than 2 points, or a near-collinear basis.
OodCoeffs fit_ood(const LossSeries& l_pt, const LossSeries& l_cpt, const LossSeries& l_ood,
                  const OodOptions& opts = {});

LossSeries predict_ood(const OodCoeffs& coeffs, const LossSeries& l_pt, const LossSeries& l_cpt);

}  // namespace cptlaw
