#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cptlaw/fit.hpp"
#include "cptlaw/hpopt.hpp"
#include "cptlaw/law.hpp"
#include "cptlaw/ood.hpp"
#include "cptlaw/schedule.hpp"
#include "cptlaw/synth.hpp"

namespace cptlaw::io {

using json = nlohmann::json;

// ---- loss logs (CSV, header `step,<domain columns...>`) ----------------

/// Parses a loss log. Requires a `step` column of strictly increasing
/// positive integers; every other column is a series of positive finite
/// losses. Errors name the offending 1-based row.
std::map<std::string, LossSeries> load_loss_log(std::istream& in);
std::map<std::string, LossSeries> load_loss_log_file(const std::filesystem::path& path);

void write_loss_log(std::ostream& out, const std::vector<std::string>& columns,
                    const std::vector<LossSeries>& series);

// ---- area trace CSV (`step,eta,s1,m,s2`) -------------------------------

void write_area_trace(std::ostream& out, const Schedule& schedule, const AreaTrace& trace);

// ---- versioned JSON forms ----------------------------------------------

json to_json(const ScheduleSpec& spec);
ScheduleSpec schedule_spec_from_json(const json& j);

json to_json(const LawParams& params);
LawParams law_params_from_json(const json& j);

json to_json(const FitConfig& config);
FitConfig fit_config_from_json(const json& j);

json to_json(const FitResult& result);
FitResult fit_result_from_json(const json& j);

json to_json(const OptimumReport& report, Knob knob);
json to_json(const OodCoeffs& coeffs);

/// Synth spec JSON carries schedule specs rather than realized schedules.
struct SynthSpecFile {
    LawParams truth;
    std::optional<LawParams> truth_cpt;
    std::vector<ScheduleSpec> schedules;
    std::vector<EvalContext> contexts;
    double noise_sigma = 0.0;
    std::uint64_t seed = 42;
    std::int64_t subsample = 10;
    double lambda = 0.999;
    bool include_pt_phase = true;

    SynthSpec realize() const;
};

json to_json(const SynthSpecFile& spec);
SynthSpecFile synth_spec_from_json(const json& j);

// ---- run manifests -------------------------------------------------------

struct DomainColumn {
    std::string column;
    std::string role;  // "pt", "cpt" or "ood"
};

struct RunManifest {
    std::string schedule_path;
    std::string losslog_path;
    double lambda = 0.999;
    double r_cpt = 1.0;
    std::optional<double> N;
    std::vector<DomainColumn> domains;
    bool steps_relative_to_cpt = false;
};

json to_json(const RunManifest& manifest);
RunManifest run_manifest_from_json(const json& j);

/// Reads the manifest's schedule and loss log (paths resolved against
/// base_dir) and assembles a Run. Fails if a mapped column is missing.
Run load_run(const RunManifest& manifest, const std::filesystem::path& base_dir);

// ---- file helpers --------------------------------------------------------

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// ---- minimal SVG line chart ----------------------------------------------

struct SvgSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

void write_svg_chart(std::ostream& out, const std::string& title,
                     const std::vector<SvgSeries>& series);
void write_svg_chart_file(const std::filesystem::path& path, const std::string& title,
                          const std::vector<SvgSeries>& series);

}  // namespace cptlaw::io
