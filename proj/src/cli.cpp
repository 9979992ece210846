#include "cptlaw/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "cptlaw/areas.hpp"
#include "cptlaw/fit.hpp"
#include "cptlaw/hpopt.hpp"
#include "cptlaw/io.hpp"
#include "cptlaw/law.hpp"
#include "cptlaw/ood.hpp"
#include "cptlaw/synth.hpp"

namespace fs = std::filesystem;

namespace cptlaw::cli {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Domain domain_from(const std::string& s) {
    if (s == "pt") return Domain::pt;
    if (s == "cpt") return Domain::cpt;
    throw DataError("domain must be pt or cpt (got \"" + s + "\")");
}

std::map<std::string, double> parse_kv_list(const std::string& text) {
    std::map<std::string, double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw DataError("--at expects comma-separated key=value pairs, got \"" + item + "\"");
        std::string key = item.substr(0, eq);
        try {
            out[key] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw DataError("--at: cannot parse value for \"" + key + "\"");
        }
    }
    return out;
}

void write_curve_csv(const fs::path& path, const LossSeries& series) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write file: " + path.string());
    f << "step,loss\n";
    for (const auto& p : series) f << p.step << ',' << fmt17(p.loss) << '\n';
}

struct TemplateFlags {
    ScheduleTemplate tmpl;
    double cpt_peak = -1.0;  // <0 = unset

    void attach(CLI::App* cmd) {
        cmd->add_option("--pt-steps", tmpl.pt_steps, "PT stage length");
        cmd->add_option("--pt-peak", tmpl.pt_peak, "PT peak learning rate");
        cmd->add_option("--pt-decay-fraction", tmpl.pt_decay_fraction,
                        "fraction of the PT stage spent decaying");
        cmd->add_option("--potential", tmpl.loss_potential,
                        "PT final LR as a fraction of the peak");
        cmd->add_option("--cpt-steps", tmpl.cpt_steps, "CPT stage length");
        cmd->add_option("--cpt-peak", cpt_peak, "CPT peak LR (default: PT peak)");
        cmd->add_option("--warmup-fraction", tmpl.cpt_warmup_fraction,
                        "fraction of the CPT stage spent re-warming");
        cmd->add_flag("--rewarm-from-zero", tmpl.rewarm_from_zero,
                      "re-warm the CPT stage from zero LR");
        cmd->add_flag("--scratch", tmpl.scratch, "no PT stage (train from scratch)");
    }
    ScheduleTemplate resolve() const {
        ScheduleTemplate t = tmpl;
        if (cpt_peak >= 0.0) t.cpt_peak = cpt_peak;
        return t;
    }
};

int run_areas(const std::string& schedule_path, double lambda, std::optional<double> epsilon,
              bool reset, const std::string& out_path, const std::string& svg_path) {
    Schedule sched = io::schedule_spec_from_json(io::read_json_file(schedule_path)).realize();
    AreaOptions opts;
    opts.lambda = lambda;
    opts.lr_weight_epsilon = epsilon;
    opts.reset_momentum_at_boundary = reset;
    AreaTrace trace = compute_areas(sched, opts);

    std::ofstream f(out_path);
    if (!f) throw DataError("cannot write file: " + out_path);
    io::write_area_trace(f, sched, trace);

    if (!svg_path.empty()) {
        io::SvgSeries s1{"s1", {}}, s2{"s2", {}};
        for (std::int64_t t = 1; t <= trace.steps(); ++t) {
            s1.points.emplace_back(static_cast<double>(t), trace.s1[static_cast<std::size_t>(t)]);
            s2.points.emplace_back(static_cast<double>(t), trace.s2[static_cast<std::size_t>(t)]);
        }
        io::write_svg_chart_file(svg_path, "LR areas", {s1, s2});
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Continual-pre-training loss-law toolkit"};
    app.require_subcommand(1);

    // ---- areas ----
    auto* areas_cmd = app.add_subcommand("areas", "compute LR areas for a schedule");
    std::string a_schedule, a_out, a_svg;
    double a_lambda = 0.999;
    double a_epsilon = -1.0;
    bool a_reset = false;
    areas_cmd->add_option("--schedule", a_schedule, "schedule spec JSON")->required();
    areas_cmd->add_option("--lambda", a_lambda, "annealing-area decay constant");
    areas_cmd->add_option("--epsilon", a_epsilon, "LR-weighted S2 exponent (off when negative)");
    areas_cmd->add_flag("--reset-at-boundary", a_reset, "restart momentum at the PT/CPT boundary");
    areas_cmd->add_option("--out", a_out, "output trace CSV")->required();
    areas_cmd->add_option("--svg", a_svg, "optional SVG chart path");

    // ---- fit ----
    auto* fit_cmd = app.add_subcommand("fit", "fit law parameters to logged loss curves");
    std::vector<std::string> f_manifests;
    std::string f_config, f_out;
    std::int64_t f_seed = -1;
    fit_cmd->add_option("--manifest", f_manifests, "run manifest JSON (repeatable)")->required();
    fit_cmd->add_option("--config", f_config, "fit config JSON");
    fit_cmd->add_option("--seed", f_seed, "override the config seed");
    fit_cmd->add_option("--out", f_out, "output fit report JSON")->required();

    // ---- predict ----
    auto* pred_cmd = app.add_subcommand("predict", "predict a loss curve under a schedule");
    std::string p_params, p_schedule, p_out, p_domain = "pt", p_svg;
    double p_lambda = 0.999, p_rcpt = 1.0, p_N = 1.0;
    bool p_cpt_only = false;
    pred_cmd->add_option("--params", p_params, "law params JSON")->required();
    pred_cmd->add_option("--schedule", p_schedule, "schedule spec JSON")->required();
    pred_cmd->add_option("--domain", p_domain, "validation domain (pt|cpt)");
    pred_cmd->add_option("--lambda", p_lambda, "annealing-area decay constant");
    pred_cmd->add_option("--r-cpt", p_rcpt, "CPT-data fraction");
    pred_cmd->add_option("--N", p_N, "model size");
    pred_cmd->add_flag("--cpt-only", p_cpt_only, "emit only CPT-stage steps");
    pred_cmd->add_option("--out", p_out, "output curve CSV")->required();
    pred_cmd->add_option("--svg", p_svg, "optional SVG chart path");

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "generate synthetic loss logs");
    std::string s_spec, s_out;
    std::int64_t s_seed = -1;
    sim_cmd->add_option("--spec", s_spec, "synth spec JSON")->required();
    sim_cmd->add_option("--seed", s_seed, "override the spec seed");
    sim_cmd->add_option("--out", s_out, "output dataset directory")->required();

    // ---- optimize ----
    auto* opt_cmd = app.add_subcommand("optimize", "search a CPT hyper-parameter");
    std::string o_knob, o_params_pt, o_params_cpt, o_out, o_curve, o_svg;
    double o_lambda1 = 0.5, o_lo = 0.0, o_hi = 1.0, o_lambda = 0.999;
    int o_grid = 256;
    bool o_range_set = false;
    TemplateFlags o_tmpl;
    opt_cmd->add_option("--knob", o_knob, "loss_potential|peak_lr|replay_ratio|cpt_steps")
        ->required();
    opt_cmd->add_option("--lambda1", o_lambda1, "balance weight of the pt domain");
    opt_cmd->add_option("--params-pt", o_params_pt, "pt-domain law params JSON")->required();
    opt_cmd->add_option("--params-cpt", o_params_cpt, "cpt-domain law params JSON")->required();
    opt_cmd->add_option("--lo", o_lo, "knob range low end")->each([&](const std::string&) { o_range_set = true; });
    opt_cmd->add_option("--hi", o_hi, "knob range high end")->each([&](const std::string&) { o_range_set = true; });
    opt_cmd->add_option("--grid", o_grid, "grid points");
    opt_cmd->add_option("--lambda", o_lambda, "annealing-area decay constant");
    opt_cmd->add_option("--out", o_out, "output report JSON")->required();
    opt_cmd->add_option("--curve", o_curve, "optional (knob, objective) CSV");
    opt_cmd->add_option("--svg", o_svg, "optional SVG chart path");
    o_tmpl.attach(opt_cmd);

    // ---- ood ----
    auto* ood_cmd = app.add_subcommand("ood", "fit the out-of-domain linear combination");
    std::string d_log, d_pt_col, d_cpt_col, d_ood_col, d_out;
    bool d_nonneg = false;
    ood_cmd->add_option("--log", d_log, "loss log CSV")->required();
    ood_cmd->add_option("--pt-col", d_pt_col, "pt-domain column")->required();
    ood_cmd->add_option("--cpt-col", d_cpt_col, "cpt-domain column")->required();
    ood_cmd->add_option("--ood-col", d_ood_col, "ood column")->required();
    ood_cmd->add_flag("--nonnegative", d_nonneg, "clamp coefficients to be nonnegative");
    ood_cmd->add_option("--out", d_out, "output coefficients JSON")->required();

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate the law at explicit areas");
    std::string e_params, e_at, e_domain = "pt";
    double e_rcpt = 1.0, e_N = 1.0;
    bool e_json = false;
    eval_cmd->add_option("--params", e_params, "law params JSON")->required();
    eval_cmd->add_option("--at", e_at, "s1pt=..,s2pt=..,s1cpt=..,s2cpt=..")->required();
    eval_cmd->add_option("--domain", e_domain, "validation domain (pt|cpt)");
    eval_cmd->add_option("--r-cpt", e_rcpt, "CPT-data fraction");
    eval_cmd->add_option("--N", e_N, "model size");
    eval_cmd->add_flag("--json", e_json, "print the breakdown as JSON");

    std::vector<const char*> argv;
    argv.push_back("cptlaw");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*areas_cmd) {
            std::optional<double> eps;
            if (a_epsilon >= 0.0) eps = a_epsilon;
            return run_areas(a_schedule, a_lambda, eps, a_reset, a_out, a_svg);
        }

        if (*fit_cmd) {
            FitConfig config;
            if (!f_config.empty()) config = io::fit_config_from_json(io::read_json_file(f_config));
            if (f_seed >= 0) config.seed = static_cast<std::uint64_t>(f_seed);

            Dataset dataset;
            for (const auto& mpath : f_manifests) {
                auto manifest = io::run_manifest_from_json(io::read_json_file(mpath));
                dataset.runs.push_back(io::load_run(manifest, fs::path(mpath).parent_path()));
            }

            io::json report{{"version", 1}, {"config", io::to_json(config)}};
            if (config.joint) {
                report["domains"]["joint"] = io::to_json(fit(dataset, config));
            } else {
                for (Domain dom : {Domain::pt, Domain::cpt}) {
                    if (dataset.observation_count(dom) == 0) continue;
                    FitConfig c = config;
                    c.domain = dom;
                    report["domains"][to_string(dom)] = io::to_json(fit(dataset, c));
                }
                if (!report.contains("domains"))
                    throw DataError("fit: manifests map no pt or cpt columns");
            }
            io::write_json_file(f_out, report);
            out << "wrote " << f_out << '\n';
            return 0;
        }

        if (*pred_cmd) {
            LawParams params = io::law_params_from_json(io::read_json_file(p_params));
            Schedule sched = io::schedule_spec_from_json(io::read_json_file(p_schedule)).realize();
            PredictOptions popts;
            popts.lambda = p_lambda;
            popts.include_pt_phase = !p_cpt_only;
            EvalContext ctx{p_rcpt, p_N, domain_from(p_domain)};
            LossSeries curve = predict_curve(params, sched, popts, ctx);
            write_curve_csv(p_out, curve);
            if (!p_svg.empty()) {
                io::SvgSeries s{"predicted " + p_domain, {}};
                for (const auto& p : curve)
                    s.points.emplace_back(static_cast<double>(p.step), p.loss);
                io::write_svg_chart_file(p_svg, "predicted loss", {s});
            }
            out << "wrote " << p_out << '\n';
            return 0;
        }

        if (*sim_cmd) {
            auto spec_file = io::synth_spec_from_json(io::read_json_file(s_spec));
            if (s_seed >= 0) spec_file.seed = static_cast<std::uint64_t>(s_seed);
            SynthSpec spec = spec_file.realize();
            Dataset dataset = generate(spec);

            fs::create_directories(s_out);
            for (std::size_t i = 0; i < dataset.runs.size(); ++i) {
                const Run& run = dataset.runs[i];
                std::string tag = std::to_string(i);
                io::write_json_file(fs::path(s_out) / ("schedule_" + tag + ".json"),
                                    io::to_json(spec_file.schedules[i]));
                std::ofstream lf(fs::path(s_out) / ("losses_" + tag + ".csv"));
                write_loss_log(lf, {"loss_pt", "loss_cpt"},
                               {run.observations.at(Domain::pt), run.observations.at(Domain::cpt)});
                io::RunManifest manifest;
                manifest.schedule_path = "schedule_" + tag + ".json";
                manifest.losslog_path = "losses_" + tag + ".csv";
                manifest.lambda = spec.lambda;
                manifest.r_cpt = run.r_cpt;
                manifest.N = run.N;
                manifest.domains = {{"loss_pt", "pt"}, {"loss_cpt", "cpt"}};
                io::write_json_file(fs::path(s_out) / ("manifest_" + tag + ".json"),
                                    io::to_json(manifest));
            }
            out << "wrote " << dataset.runs.size() << " runs to " << s_out << '\n';
            return 0;
        }

        if (*opt_cmd) {
            KnobSpace space;
            space.knob = knob_from_string(o_knob);
            space.schedule_template = o_tmpl.resolve();
            space.grid_points = o_grid;
            if (o_range_set) {
                space.lo = o_lo;
                space.hi = o_hi;
            } else {
                switch (space.knob) {
                    case Knob::loss_potential:
                    case Knob::replay_ratio: space.lo = 0.0; space.hi = 1.0; break;
                    case Knob::peak_lr:
                        space.lo = 0.05 * space.schedule_template.pt_peak;
                        space.hi = 3.0 * space.schedule_template.pt_peak;
                        break;
                    case Knob::cpt_steps: space.lo = 1; space.hi = 10000; break;
                }
            }
            BalanceWeights weights{o_lambda1, 1.0 - o_lambda1};
            LawParams ppt = io::law_params_from_json(io::read_json_file(o_params_pt));
            LawParams pcpt = io::law_params_from_json(io::read_json_file(o_params_cpt));
            OptimumReport rep = optimize_knob(space, weights, ppt, pcpt, o_lambda);
            io::write_json_file(o_out, io::to_json(rep, space.knob));
            if (!o_curve.empty()) {
                std::ofstream cf(o_curve);
                if (!cf) throw DataError("cannot write file: " + o_curve);
                cf << "knob,objective\n";
                for (const auto& [k, v] : rep.curve) cf << fmt17(k) << ',' << fmt17(v) << '\n';
            }
            if (!o_svg.empty()) {
                io::SvgSeries s{"objective", rep.curve};
                io::write_svg_chart_file(o_svg, "balance objective vs " + o_knob, {s});
            }
            out << "optimum " << o_knob << " = " << fmt17(rep.knob_value)
                << " (objective " << fmt17(rep.objective) << ")\n";
            return 0;
        }

        if (*ood_cmd) {
            auto columns = io::load_loss_log_file(d_log);
            auto need = [&](const std::string& name) -> const LossSeries& {
                auto it = columns.find(name);
                if (it == columns.end())
                    throw DataError("column \"" + name + "\" not present in " + d_log);
                return it->second;
            };
            OodOptions oopts;
            oopts.nonnegative = d_nonneg;
            OodCoeffs coeffs = fit_ood(need(d_pt_col), need(d_cpt_col), need(d_ood_col), oopts);
            io::write_json_file(d_out, io::to_json(coeffs));
            out << "lambda1' = " << fmt17(coeffs.lambda1p) << ", lambda2' = "
                << fmt17(coeffs.lambda2p) << ", rmse = " << fmt17(coeffs.residual_rmse) << '\n';
            return 0;
        }

        if (*eval_cmd) {
            LawParams params = io::law_params_from_json(io::read_json_file(e_params));
            auto kv = parse_kv_list(e_at);
            for (const char* key : {"s1pt", "s2pt", "s1cpt", "s2cpt"})
                if (!kv.count(key)) throw DataError(std::string("--at: missing ") + key);
            EvalContext ctx{e_rcpt, e_N, domain_from(e_domain)};
            LossBreakdown bd =
                eval_loss(params, kv["s1pt"], kv["s2pt"], kv["s1cpt"], kv["s2cpt"], ctx);
            if (e_json) {
                io::json j{{"total", bd.total},       {"base_power", bd.base_power},
                           {"anneal_pt", bd.anneal_pt}, {"anneal_cpt", bd.anneal_cpt},
                           {"shift", bd.shift},       {"size_term", bd.size_term}};
                out << j.dump(2) << '\n';
            } else {
                out << "total      " << fmt17(bd.total) << '\n'
                    << "base_power " << fmt17(bd.base_power) << '\n'
                    << "anneal_pt  " << fmt17(bd.anneal_pt) << '\n'
                    << "anneal_cpt " << fmt17(bd.anneal_cpt) << '\n'
                    << "shift      " << fmt17(bd.shift) << '\n'
                    << "size_term  " << fmt17(bd.size_term) << '\n';
            }
            return 0;
        }
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace cptlaw::cli
