#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cptlaw/types.hpp"

namespace cptlaw {

/// Interpolation families for one phase of a learning-rate schedule.
/// wsd_stable behaves like constant and wsd_decay like linear; they exist so
/// warmup-stable-decay schedules read as such in config files.
enum class PhaseKind { constant, linear, cosine, wsd_stable, wsd_decay };

const char* to_string(PhaseKind k);
PhaseKind phase_kind_from_string(const std::string& s);

struct PhaseSpec {
    PhaseKind kind = PhaseKind::constant;
    std::int64_t steps = 0;
    double lr_start = 0.0;
    double lr_end = 0.0;  // ignored for constant / wsd_stable

    friend bool operator==(const PhaseSpec&, const PhaseSpec&) = default;
};

/// A fully realized per-step LR sequence. boundary marks the last PT step
/// (0 means the whole schedule is CPT, e.g. training from scratch).
struct Schedule {
    std::vector<double> etas;
    std::int64_t boundary = 0;

    std::int64_t length() const { return static_cast<std::int64_t>(etas.size()); }
};

/// Concatenates the phases into one eta sequence. Linear and cosine phases
/// include both endpoints; a single-step phase emits lr_start. boundary of
/// the result is 0.
Schedule build_schedule(std::span<const PhaseSpec> phases);
Schedule build_schedule(std::initializer_list<PhaseSpec> phases);

/// PT followed by CPT, boundary = PT length. Inner boundaries of the inputs
/// are ignored.
Schedule concat_pt_cpt(const Schedule& pt, const Schedule& cpt);

/// Declarative form of a schedule, the unit of (de)serialization.
struct ScheduleSpec {
    std::vector<PhaseSpec> phases;
    std::optional<std::int64_t> boundary;

    Schedule realize() const;
    friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

}  // namespace cptlaw
