#include "cptlaw/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace cptlaw::io {

namespace {

constexpr int kFormatVersion = 1;

void check_version(const json& j, const char* key, const char* what) {
    if (!j.contains(key)) throw DataError(std::string(what) + ": missing \"" + key + "\" field");
    int v = j.at(key).get<int>();
    if (v != kFormatVersion)
        throw DataError(std::string(what) + ": unsupported " + key + " " + std::to_string(v) +
                        " (expected " + std::to_string(kFormatVersion) + ")");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t')) f.pop_back();
        std::size_t b = f.find_first_not_of(" \t");
        if (b != std::string::npos && b > 0) f.erase(0, b);
    }
    return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("loss log row " + std::to_string(row) + ": malformed value \"" + s +
                        "\" in column " + col);
    return v;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json double_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double double_from(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

}  // namespace

std::map<std::string, LossSeries> load_loss_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("loss log: missing header");
    auto header = split_csv_line(line);
    std::size_t step_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "step") step_col = i;
    if (step_col == header.size()) throw DataError("loss log: header has no \"step\" column");
    if (header.size() < 2) throw DataError("loss log: no loss columns");

    std::map<std::string, LossSeries> out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i == step_col) continue;
        if (header[i].empty()) throw DataError("loss log: empty column name in header");
        if (out.count(header[i])) throw DataError("loss log: duplicate column " + header[i]);
        out[header[i]] = {};
    }

    std::int64_t prev_step = 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("loss log row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        double step_raw = parse_double(fields[step_col], row, "step");
        auto step = static_cast<std::int64_t>(step_raw);
        if (step_raw != static_cast<double>(step) || step < 1)
            throw DataError("loss log row " + std::to_string(row) +
                            ": step must be a positive integer");
        if (step <= prev_step)
            throw DataError("loss log row " + std::to_string(row) +
                            ": steps must be strictly increasing");
        prev_step = step;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i == step_col) continue;
            double v = parse_double(fields[i], row, header[i]);
            if (!std::isfinite(v))
                throw DataError("loss log row " + std::to_string(row) + ": non-finite loss in " +
                                header[i]);
            if (!(v > 0.0))
                throw DataError("loss log row " + std::to_string(row) +
                                ": nonpositive loss in " + header[i]);
            out[header[i]].push_back({step, v});
        }
    }
    return out;
}

std::map<std::string, LossSeries> load_loss_log_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open loss log: " + path.string());
    try {
        return load_loss_log(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_loss_log(std::ostream& out, const std::vector<std::string>& columns,
                    const std::vector<LossSeries>& series) {
    if (columns.size() != series.size())
        throw DataError("write_loss_log: column/series count mismatch");
    if (series.empty()) throw DataError("write_loss_log: no series");
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].size() != series[0].size())
            throw DataError("write_loss_log: series lengths differ");

    out << "step";
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < series[0].size(); ++r) {
        out << series[0][r].step;
        for (const auto& s : series) out << ',' << fmt17(s[r].loss);
        out << '\n';
    }
}

void write_area_trace(std::ostream& out, const Schedule& schedule, const AreaTrace& trace) {
    out << "step,eta,s1,m,s2\n";
    for (std::int64_t t = 1; t <= trace.steps(); ++t) {
        auto i = static_cast<std::size_t>(t);
        out << t << ',' << fmt17(schedule.etas[i - 1]) << ',' << fmt17(trace.s1[i]) << ','
            << fmt17(trace.m[i]) << ',' << fmt17(trace.s2[i]) << '\n';
    }
}

// ---- schedules -----------------------------------------------------------

json to_json(const ScheduleSpec& spec) {
    json phases = json::array();
    for (const auto& p : spec.phases) {
        json jp{{"kind", to_string(p.kind)}, {"steps", p.steps}, {"lr_start", p.lr_start}};
        if (p.kind != PhaseKind::constant && p.kind != PhaseKind::wsd_stable)
            jp["lr_end"] = p.lr_end;
        phases.push_back(std::move(jp));
    }
    json j{{"version", kFormatVersion}, {"phases", std::move(phases)}};
    if (spec.boundary) j["boundary"] = *spec.boundary;
    return j;
}

ScheduleSpec schedule_spec_from_json(const json& j) {
    check_version(j, "version", "schedule spec");
    ScheduleSpec spec;
    if (!j.contains("phases") || !j.at("phases").is_array() || j.at("phases").empty())
        throw DataError("schedule spec: missing or empty \"phases\"");
    for (const auto& jp : j.at("phases")) {
        PhaseSpec p;
        p.kind = phase_kind_from_string(jp.at("kind").get<std::string>());
        p.steps = jp.at("steps").get<std::int64_t>();
        p.lr_start = jp.at("lr_start").get<double>();
        p.lr_end = jp.value("lr_end", 0.0);
        spec.phases.push_back(p);
    }
    if (j.contains("boundary")) spec.boundary = j.at("boundary").get<std::int64_t>();
    return spec;
}

// ---- law params ------------------------------------------------------------

json to_json(const LawParams& p) {
    json variant{{"form", to_string(p.form)}};
    if (p.form == LawForm::lr_weighted) variant["epsilon"] = p.epsilon;
    if (p.form == LawForm::s2_power) {
        variant["zeta1"] = p.zeta1;
        variant["zeta2"] = p.zeta2;
    }
    json j{{"law_version", kFormatVersion},
           {"L0", p.L0},
           {"A", p.A},
           {"alpha", p.alpha},
           {"C1", p.C1},
           {"C2", p.C2},
           {"B", p.B},
           {"E", p.E},
           {"beta", p.beta},
           {"variant", std::move(variant)}};
    if (p.replay) j["replay"] = json{{"a1", p.replay->a1}, {"a2", p.replay->a2}};
    if (p.model_size)
        j["model_size"] = json{{"gamma1", p.model_size->gamma1},
                               {"gamma2", p.model_size->gamma2},
                               {"gamma3", p.model_size->gamma3},
                               {"F", p.model_size->F}};
    return j;
}

LawParams law_params_from_json(const json& j) {
    check_version(j, "law_version", "law params");
    LawParams p;
    p.L0 = j.at("L0").get<double>();
    p.A = j.at("A").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.C1 = j.at("C1").get<double>();
    p.C2 = j.at("C2").get<double>();
    p.B = j.at("B").get<double>();
    p.E = j.at("E").get<double>();
    p.beta = j.at("beta").get<double>();
    if (j.contains("variant")) {
        const json& v = j.at("variant");
        p.form = law_form_from_string(v.at("form").get<std::string>());
        if (p.form == LawForm::lr_weighted) p.epsilon = v.at("epsilon").get<double>();
        if (p.form == LawForm::s2_power) {
            p.zeta1 = v.at("zeta1").get<double>();
            p.zeta2 = v.at("zeta2").get<double>();
        }
    }
    if (j.contains("replay") && !j.at("replay").is_null())
        p.replay = ReplayTerms{j.at("replay").at("a1").get<double>(),
                               j.at("replay").at("a2").get<double>()};
    if (j.contains("model_size") && !j.at("model_size").is_null())
        p.model_size = ModelSizeTerms{j.at("model_size").at("gamma1").get<double>(),
                                      j.at("model_size").at("gamma2").get<double>(),
                                      j.at("model_size").at("gamma3").get<double>(),
                                      j.at("model_size").at("F").get<double>()};
    return p;
}

// ---- fit config / result ---------------------------------------------------

json to_json(const FitConfig& c) {
    json variant{{"form", to_string(c.form)}};
    if (c.form == LawForm::lr_weighted) variant["epsilon"] = c.epsilon;
    return json{{"version", kFormatVersion},
                {"huber_delta", c.huber_delta},
                {"n_starts", c.n_starts},
                {"max_iterations", c.max_iterations},
                {"seed", c.seed},
                {"free_s1_pt", c.free_s1_pt},
                {"variant", std::move(variant)},
                {"fit_replay", c.fit_replay},
                {"fit_model_size", c.fit_model_size},
                {"gradient", to_string(c.gradient)},
                {"domain", to_string(c.domain)},
                {"joint", c.joint},
                {"allow_negative_shift", c.allow_negative_shift},
                {"lambda", c.lambda}};
}

FitConfig fit_config_from_json(const json& j) {
    check_version(j, "version", "fit config");
    FitConfig c;
    c.huber_delta = j.value("huber_delta", c.huber_delta);
    c.n_starts = j.value("n_starts", c.n_starts);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.seed = j.value("seed", c.seed);
    c.free_s1_pt = j.value("free_s1_pt", c.free_s1_pt);
    if (j.contains("variant")) {
        const json& v = j.at("variant");
        c.form = law_form_from_string(v.at("form").get<std::string>());
        if (c.form == LawForm::lr_weighted) c.epsilon = v.at("epsilon").get<double>();
    }
    c.fit_replay = j.value("fit_replay", c.fit_replay);
    c.fit_model_size = j.value("fit_model_size", c.fit_model_size);
    if (j.contains("gradient"))
        c.gradient = gradient_mode_from_string(j.at("gradient").get<std::string>());
    if (j.contains("domain")) {
        std::string d = j.at("domain").get<std::string>();
        if (d != "pt" && d != "cpt") throw DataError("fit config: domain must be pt or cpt");
        c.domain = d == "pt" ? Domain::pt : Domain::cpt;
    }
    c.joint = j.value("joint", c.joint);
    c.allow_negative_shift = j.value("allow_negative_shift", c.allow_negative_shift);
    c.lambda = j.value("lambda", c.lambda);
    return c;
}

json to_json(const FitResult& r) {
    json rsq = json::object(), hub = json::object();
    for (const auto& [d, v] : r.r_squared) rsq[to_string(d)] = double_or_null(v);
    for (const auto& [d, v] : r.huber) hub[to_string(d)] = double_or_null(v);
    json starts = json::array();
    for (double v : r.start_objectives) starts.push_back(double_or_null(v));
    json j{{"version", kFormatVersion},
           {"params", to_json(r.params)},
           {"objective", r.objective},
           {"r_squared", std::move(rsq)},
           {"huber", std::move(hub)},
           {"start_index", r.start_index},
           {"converged", r.converged},
           {"start_objectives", std::move(starts)},
           {"warnings", r.warnings},
           {"huber_delta", r.huber_delta},
           {"lambda", r.lambda}};
    if (r.fitted_s1_pt) j["fitted_s1_pt"] = *r.fitted_s1_pt;
    return j;
}

FitResult fit_result_from_json(const json& j) {
    check_version(j, "version", "fit result");
    FitResult r;
    r.params = law_params_from_json(j.at("params"));
    r.objective = j.at("objective").get<double>();
    for (const auto& [key, val] : j.at("r_squared").items())
        r.r_squared[key == "pt" ? Domain::pt : Domain::cpt] = double_from(val);
    for (const auto& [key, val] : j.at("huber").items())
        r.huber[key == "pt" ? Domain::pt : Domain::cpt] = double_from(val);
    r.start_index = j.at("start_index").get<int>();
    r.converged = j.at("converged").get<bool>();
    for (const auto& v : j.at("start_objectives")) r.start_objectives.push_back(double_from(v));
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.huber_delta = j.value("huber_delta", r.huber_delta);
    r.lambda = j.value("lambda", r.lambda);
    if (j.contains("fitted_s1_pt")) r.fitted_s1_pt = j.at("fitted_s1_pt").get<double>();
    return r;
}

json to_json(const OptimumReport& r, Knob knob) {
    return json{{"version", kFormatVersion},
                {"knob", to_string(knob)},
                {"knob_value", r.knob_value},
                {"objective", r.objective},
                {"delta_pt", r.delta_pt},
                {"delta_cpt", r.delta_cpt},
                {"grid_points", r.curve.size()}};
}

json to_json(const OodCoeffs& c) {
    return json{{"version", kFormatVersion},
                {"lambda1p", c.lambda1p},
                {"lambda2p", c.lambda2p},
                {"residual_rmse", c.residual_rmse}};
}

// ---- synth spec -------------------------------------------------------------

SynthSpec SynthSpecFile::realize() const {
    SynthSpec s;
    s.truth = truth;
    s.truth_cpt = truth_cpt;
    for (const auto& spec : schedules) s.schedules.push_back(spec.realize());
    s.contexts = contexts;
    s.noise_sigma = noise_sigma;
    s.seed = seed;
    s.subsample = subsample;
    s.lambda = lambda;
    s.include_pt_phase = include_pt_phase;
    return s;
}

json to_json(const SynthSpecFile& s) {
    json scheds = json::array();
    for (const auto& spec : s.schedules) scheds.push_back(to_json(spec));
    json j{{"version", kFormatVersion},
           {"truth", to_json(s.truth)},
           {"schedules", std::move(scheds)},
           {"noise_sigma", s.noise_sigma},
           {"seed", s.seed},
           {"subsample", s.subsample},
           {"lambda", s.lambda},
           {"include_pt_phase", s.include_pt_phase}};
    if (s.truth_cpt) j["truth_cpt"] = to_json(*s.truth_cpt);
    if (!s.contexts.empty()) {
        json ctxs = json::array();
        for (const auto& c : s.contexts) ctxs.push_back(json{{"r_cpt", c.r_cpt}, {"N", c.N}});
        j["contexts"] = std::move(ctxs);
    }
    return j;
}

SynthSpecFile synth_spec_from_json(const json& j) {
    check_version(j, "version", "synth spec");
    SynthSpecFile s;
    s.truth = law_params_from_json(j.at("truth"));
    if (j.contains("truth_cpt")) s.truth_cpt = law_params_from_json(j.at("truth_cpt"));
    for (const auto& js : j.at("schedules")) s.schedules.push_back(schedule_spec_from_json(js));
    if (j.contains("contexts")) {
        for (const auto& jc : j.at("contexts")) {
            EvalContext c;
            c.r_cpt = jc.value("r_cpt", 1.0);
            c.N = jc.value("N", 1.0);
            s.contexts.push_back(c);
        }
    }
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.seed = j.value("seed", std::uint64_t{42});
    s.subsample = j.value("subsample", std::int64_t{10});
    s.lambda = j.value("lambda", 0.999);
    s.include_pt_phase = j.value("include_pt_phase", true);
    return s;
}

// ---- manifests ----------------------------------------------------------------

json to_json(const RunManifest& m) {
    json domains = json::array();
    for (const auto& d : m.domains)
        domains.push_back(json{{"column", d.column}, {"role", d.role}});
    json j{{"version", kFormatVersion},
           {"schedule_path", m.schedule_path},
           {"losslog_path", m.losslog_path},
           {"lambda", m.lambda},
           {"r_cpt", m.r_cpt},
           {"domains", std::move(domains)},
           {"steps_relative_to_cpt", m.steps_relative_to_cpt}};
    if (m.N) j["N"] = *m.N;
    return j;
}

RunManifest run_manifest_from_json(const json& j) {
    check_version(j, "version", "run manifest");
    RunManifest m;
    m.schedule_path = j.at("schedule_path").get<std::string>();
    m.losslog_path = j.at("losslog_path").get<std::string>();
    m.lambda = j.value("lambda", 0.999);
    if (!(m.lambda > 0.0 && m.lambda < 1.0))
        throw DataError("run manifest: lambda must lie in (0,1)");
    m.r_cpt = j.value("r_cpt", 1.0);
    if (j.contains("N")) m.N = j.at("N").get<double>();
    for (const auto& jd : j.at("domains")) {
        DomainColumn d{jd.at("column").get<std::string>(), jd.at("role").get<std::string>()};
        if (d.role != "pt" && d.role != "cpt" && d.role != "ood")
            throw DataError("run manifest: role must be pt, cpt or ood (got \"" + d.role + "\")");
        m.domains.push_back(std::move(d));
    }
    return m;
}

Run load_run(const RunManifest& manifest, const std::filesystem::path& base_dir) {
    json sj = read_json_file(base_dir / manifest.schedule_path);
    Schedule schedule = schedule_spec_from_json(sj).realize();
    auto columns = load_loss_log_file(base_dir / manifest.losslog_path);

    Run run;
    run.schedule = schedule;
    run.r_cpt = manifest.r_cpt;
    run.N = manifest.N;
    for (const auto& d : manifest.domains) {
        auto it = columns.find(d.column);
        if (it == columns.end())
            throw DataError("run manifest: column \"" + d.column + "\" not present in " +
                            manifest.losslog_path);
        if (d.role == "ood") continue;  // ood series feed fit_ood, not the law fit
        LossSeries series = it->second;
        if (manifest.steps_relative_to_cpt)
            for (auto& p : series) p.step += schedule.boundary;
        Domain dom = d.role == "pt" ? Domain::pt : Domain::cpt;
        if (run.observations.count(dom))
            throw DataError("run manifest: duplicate role \"" + d.role + "\"");
        run.observations[dom] = std::move(series);
    }
    return run;
}

// ---- file helpers ---------------------------------------------------------------

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("JSON parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << j.dump(2) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << text;
}

// ---- svg ---------------------------------------------------------------------------

void write_svg_chart(std::ostream& out, const std::string& title,
                     const std::vector<SvgSeries>& series) {
    const double W = 720, H = 440, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            } else {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto Y = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = xmin + (xmax - xmin) * i / 4.0;
        double fy = ymin + (ymax - ymin) * i / 4.0;
        out << "<text x=\"" << X(fx) << "\" y=\"" << H - mb + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt17(fx).substr(0, 9)
            << "</text>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << Y(fy) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt17(fy).substr(0, 9)
            << "</text>\n";
    }
    int ci = 0;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << colors[ci % 5] << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points)
            if (std::isfinite(x) && std::isfinite(y)) out << X(x) << ',' << Y(y) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 16 * ci
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[ci % 5] << "\">"
            << s.name << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
}

void write_svg_chart_file(const std::filesystem::path& path, const std::string& title,
                          const std::vector<SvgSeries>& series) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    write_svg_chart(out, title, series);
}

}  // namespace cptlaw::io
