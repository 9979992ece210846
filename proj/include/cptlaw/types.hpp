#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cptlaw {

/// Validation domain a loss series belongs to.
enum class Domain { pt, cpt };

inline const char* to_string(Domain d) { return d == Domain::pt ? "pt" : "cpt"; }

struct LossPoint {
    std::int64_t step = 0;
    double loss = 0.0;
    friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

/// Observed or predicted (step, loss) pairs for one validation domain,
/// ordered by strictly increasing step.
using LossSeries = std::vector<LossPoint>;

/// Malformed or contract-violating input (files, ranges, preconditions).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: divergence, singularity, non-finite objective.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cptlaw
