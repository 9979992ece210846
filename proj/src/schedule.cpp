#include "cptlaw/schedule.hpp"

#include <cmath>
#include <string>

namespace cptlaw {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* to_string(PhaseKind k) {
    switch (k) {
        case PhaseKind::constant: return "constant";
        case PhaseKind::linear: return "linear";
        case PhaseKind::cosine: return "cosine";
        case PhaseKind::wsd_stable: return "wsd-stable";
        case PhaseKind::wsd_decay: return "wsd-decay";
    }
    return "constant";
}

PhaseKind phase_kind_from_string(const std::string& s) {
    if (s == "constant") return PhaseKind::constant;
    if (s == "linear") return PhaseKind::linear;
    if (s == "cosine") return PhaseKind::cosine;
    if (s == "wsd-stable") return PhaseKind::wsd_stable;
    if (s == "wsd-decay") return PhaseKind::wsd_decay;
    throw DataError("unknown phase kind: \"" + s + "\"");
}

Schedule build_schedule(std::span<const PhaseSpec> phases) {
    if (phases.empty()) throw DataError("build_schedule: empty phase list");
    std::int64_t total = 0;
    for (const auto& p : phases) {
        if (p.steps < 1) throw DataError("build_schedule: phase steps must be >= 1");
        if (p.lr_start < 0.0 || p.lr_end < 0.0)
            throw DataError("build_schedule: negative learning rate");
        total += p.steps;
    }

    Schedule out;
    out.etas.reserve(static_cast<std::size_t>(total));
    for (const auto& p : phases) {
        switch (p.kind) {
            case PhaseKind::constant:
            case PhaseKind::wsd_stable:
                out.etas.insert(out.etas.end(), static_cast<std::size_t>(p.steps), p.lr_start);
                break;
            case PhaseKind::linear:
            case PhaseKind::wsd_decay: {
                if (p.steps == 1) {
                    out.etas.push_back(p.lr_start);
                    break;
                }
                double denom = static_cast<double>(p.steps - 1);
                for (std::int64_t j = 0; j < p.steps; ++j)
                    out.etas.push_back(p.lr_start +
                                       (p.lr_end - p.lr_start) * static_cast<double>(j) / denom);
                break;
            }
            case PhaseKind::cosine: {
                if (p.steps == 1) {
                    out.etas.push_back(p.lr_start);
                    break;
                }
                double denom = static_cast<double>(p.steps - 1);
                for (std::int64_t j = 0; j < p.steps; ++j) {
                    double c = (1.0 + std::cos(kPi * static_cast<double>(j) / denom)) / 2.0;
                    out.etas.push_back(p.lr_end + (p.lr_start - p.lr_end) * c);
                }
                break;
            }
        }
    }
    out.boundary = 0;
    return out;
}

Schedule build_schedule(std::initializer_list<PhaseSpec> phases) {
    return build_schedule(std::span<const PhaseSpec>(phases.begin(), phases.size()));
}

Schedule concat_pt_cpt(const Schedule& pt, const Schedule& cpt) {
    Schedule out;
    out.etas.reserve(pt.etas.size() + cpt.etas.size());
    out.etas.insert(out.etas.end(), pt.etas.begin(), pt.etas.end());
    out.etas.insert(out.etas.end(), cpt.etas.begin(), cpt.etas.end());
    out.boundary = pt.length();
    return out;
}

Schedule ScheduleSpec::realize() const {
    Schedule s = build_schedule(std::span<const PhaseSpec>(phases.data(), phases.size()));
    if (boundary) {
        if (*boundary < 0 || *boundary > s.length())
            throw DataError("schedule boundary out of range [0, length]");
        s.boundary = *boundary;
    }
    return s;
}

}  // namespace cptlaw
