#pragma once

#include <imbfc/config.hpp>
#include <imbfc/imbfc.hpp>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace imbfc::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, model_error = 3 };

inline std::shared_ptr<spdlog::logger> logger() {
    static auto log = [] {
        auto l = spdlog::stderr_color_mt("imbfc");
        l->set_pattern("[%l] %v");
        const char* env = std::getenv("IMBFC_LOG");
        const std::string level = env ? env : "info";
        l->set_level(level == "debug" ? spdlog::level::debug : level == "error" ? spdlog::level::err : spdlog::level::info);
        return l;
    }();
    return log;
}

inline Dataset load(const RunConfig& c) {
    if (c.data_dir.empty()) {
        throw ConfigError("--data is required");
    }
    return load_dataset(c.data_dir, ParseOptions{c.allow_gaps || c.real_data});
}

struct Summary {
    double min = 0.0, max = 0.0, mean = 0.0;
};

inline Summary summarize(const std::vector<double>& v) {
    Summary s{INFINITY, -INFINITY, 0.0};
    for (double x : v) {
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
        s.mean += x / static_cast<double>(v.size());
    }
    return s;
}

inline int cmd_validate(const RunConfig& c, std::ostream& out) {
    const Dataset d = load(c);
    const auto& s = d.series;
    nlohmann::json j;
    j["first_quarter"] = format_timestamp(s.start);
    j["last_quarter"] = format_timestamp(s.start + static_cast<std::int64_t>(s.size()) - 1);
    j["quarters"] = s.size();
    j["filled_quarters"] = s.filled_count();
    const auto nrv = summarize(s.nrv_mw);
    const auto pos = summarize(s.pos_price);
    const auto neg = summarize(s.neg_price);
    j["nrv_mw"] = {{"min", nrv.min}, {"max", nrv.max}, {"mean", nrv.mean}};
    j["pos_price"] = {{"min", pos.min}, {"max", pos.max}, {"mean", pos.mean}};
    j["neg_price"] = {{"min", neg.min}, {"max", neg.max}, {"mean", neg.mean}};
    std::size_t differ = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        differ += s.pos_price[i] != s.neg_price[i];
    }
    j["pos_neg_differ_fraction"] = s.size() ? static_cast<double>(differ) / static_cast<double>(s.size()) : 0.0;
    out << j.dump(2) << "\n";
    if (!c.out_dir.empty() && c.out_dir != "-") {
        detail::write_file(std::filesystem::path(c.out_dir) / "validation.json", j.dump(2) + "\n");
    }
    return ok;
}

inline int cmd_estimate(const RunConfig& c, std::ostream& out) {
    const Dataset d = load(c);
    const auto hq = c.horizons_quarters();
    const int t_max = *std::max_element(hq.begin(), hq.end());
    std::vector<int> leads(static_cast<std::size_t>(t_max));
    std::iota(leads.begin(), leads.end(), 1);
    std::optional<QuarterSpan> window;
    if (c.validation_start) {
        // learn only on the period before validation, like the first backtest vintage
        window = QuarterSpan{d.series.start, parse_timestamp(*c.validation_start)};
    }
    const auto tm = estimate_transitions(d.series, default_scheme(), leads, window);
    const std::filesystem::path dir(c.out_dir);
    detail::write_file(dir / "transitions.json", to_json(tm).dump() + "\n");
    std::vector<int> maps = c.heatmap_leads;
    for (int h : hq) {
        maps.push_back(h);
    }
    std::sort(maps.begin(), maps.end());
    maps.erase(std::unique(maps.begin(), maps.end()), maps.end());
    std::size_t flagged = 0;
    for (int k : leads) {
        for (bool f : tm.at(k).fallback) {
            flagged += f;
        }
    }
    for (int k : maps) {
        if (tm.has_lead(k)) {
            detail::write_file(dir / "heatmaps" / ("transition_k" + std::to_string(k) + ".csv"), export_heatmap(tm, k));
        }
    }
    out << "estimated " << leads.size() << " transition matrices (" << tm.scheme().n_bins() << " bins), "
        << flagged << " fallback rows; written to " << dir.string() << "\n";
    return ok;
}

inline int cmd_forecast(const RunConfig& c, std::ostream& out) {
    if (!c.at) {
        throw ConfigError("--at is required");
    }
    const Dataset d = load(c);
    const auto& s = d.series;
    const QuarterIndex t = parse_timestamp(*c.at);
    if (!s.span().contains(t)) {
        throw RangeError("issue time " + format_timestamp(t) + " outside the data");
    }
    const int horizon = c.horizon_min / minutes_per_quarter;
    const QuarterSpan month{month_start(t), add_months(month_start(t), 1)};
    for (Technique tech : c.techniques) {
        // same vintage as the backtest would use for this month
        const QuarterSpan train = policy_for(tech) == LearningPolicy::expanding
                                      ? QuarterSpan{s.start, month.begin}
                                      : QuarterSpan{std::max(s.start, add_months(month.begin, -1)), month.begin};
        if (train.empty()) {
            throw InsufficientDataError("no learning data before " + format_timestamp(month.begin));
        }
        std::string csv = forecast_csv_header;
        if (tech == Technique::tspa) {
            std::vector<int> leads(static_cast<std::size_t>(horizon));
            std::iota(leads.begin(), leads.end(), 1);
            TspaModel model(estimate_transitions(s, default_scheme(), leads, train), d.arc);
            const auto dists = forecast_horizon(model, t, s.nrv_mw[s.offset(t)]);
            csv = export_forecast_csv(t, leads, dists);
        } else if (tech == Technique::mlp) {
            MlpConfig mc = c.mlp;
            const auto model = mlp_train(build_windows(s, horizon, c.price_mode, train), mc);
            const auto pred = mlp_predict(model, window_features(s, t, c.price_mode));
            for (int k = 1; k <= horizon; ++k) {
                csv += forecast_csv_row(t, k, pred[k - 1], std::numeric_limits<double>::quiet_NaN());
            }
        } else {
            const auto model = gp_train_direct(build_windows(s, horizon, c.price_mode, train), horizon, c.gp);
            const auto x = window_features(s, t, c.price_mode);
            for (int k = 1; k <= horizon; ++k) {
                const auto [m, sd] = gp_predict(model, x, k);
                csv += forecast_csv_row(t, k, m, sd);
            }
        }
        const std::string name = technique_name(tech);
        out << "# " << name << " issued " << format_timestamp(t) << ", horizon " << c.horizon_min << " min\n" << csv;
        if (!c.out_dir.empty() && c.out_dir != "-") {
            detail::write_file(std::filesystem::path(c.out_dir) / ("forecast_" + name + ".csv"), csv);
        }
    }
    return ok;
}

inline int cmd_backtest(const RunConfig& c, std::ostream& out) {
    const Dataset d = load(c);
    BacktestConfig b = backtest_config(c, d.series.span());
    auto log = logger();
    b.progress = [log](const std::string& msg) { log->info("{}", msg); };
    const auto result = run(b, d);
    for (const auto& w : result.warnings) {
        log->warn("{}", w);
    }
    const auto files = write_report(result, b, c.out_dir);
    out << table_csv(result);
    if (c.real_data) {
        bool all = true;
        bool any = false;
        for (int h : b.schedule.horizons) {
            try {
                const double tspa = result.at(Technique::tspa, h).scores.average().plf;
                const double gp = result.at(Technique::gp, h).scores.average().plf;
                any = true;
                const bool better = tspa < gp;
                all = all && better;
                out << "PLF " << h * minutes_per_quarter << " min: TSPA " << detail::format_fixed(tspa, 2) << " vs GP "
                    << detail::format_fixed(gp, 2) << (better ? " (TSPA lower)\n" : " (TSPA not lower)\n");
            } catch (const RangeError&) {
            }
        }
        if (any) {
            out << "TSPA PLF below GP at every horizon: " << (all ? "yes" : "no") << "\n";
        }
    }
    out << "report: " << files.size() << " files under " << c.out_dir << "\n";
    return ok;
}

inline int cmd_synth(const RunConfig& c, std::ostream& out) {
    SynthSpec spec = default_synth_spec(c.quarters, c.seed);
    spec.arc_mode = c.arc_mode;
    spec.jitter_within_bins = c.jitter;
    const Dataset d = generate(spec);
    save_dataset(d, c.out_dir);
    out << "wrote " << d.series.size() << " synthetic quarters from " << format_timestamp(d.series.start) << " to "
        << c.out_dir << "\n";
    return ok;
}

/// Full command-line entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig cfg;
    std::string horizons;
    std::string technique = "all";
    std::string config_file;
    bool show_config = false;

    CLI::App app{"Imbalance price forecasting: two-step probabilistic approach with MLP and GP baselines", "imbfc"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON file overriding defaults")->check(CLI::ExistingFile);
        sub->add_flag("--show-config", show_config, "Print the effective configuration and exit");
        sub->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", cfg.seed, "Base random seed");
    };
    auto data_flags = [&](CLI::App* sub, bool required) {
        auto* o = sub->add_option("--data", cfg.data_dir, "Directory with nrv.csv, prices.csv, arc.csv");
        if (required) {
            o->required();
        }
        sub->add_flag("--allow-gaps", cfg.allow_gaps, "Forward-fill missing quarters instead of failing");
        sub->add_flag("--real-data", cfg.real_data, "Treat input as a real market feed (implies --allow-gaps)");
    };

    auto* validate = app.add_subcommand("validate", "Ingest a dataset and report data quality");
    common(validate);
    data_flags(validate, true);
    validate->add_option("--out", cfg.out_dir, "Directory for validation.json");

    auto* estimate = app.add_subcommand("estimate", "Estimate transition matrices and export heatmaps");
    common(estimate);
    data_flags(estimate, true);
    estimate->add_option("--out", cfg.out_dir, "Output directory")->required();
    estimate->add_option("--horizons", horizons, "Comma-separated horizons in minutes (multiples of 15)");
    estimate->add_option("--validation-start", cfg.validation_start, "Estimate on data before this quarter only");

    auto* fc = app.add_subcommand("forecast", "Issue one forecast at a given quarter");
    common(fc);
    data_flags(fc, true);
    fc->add_option("--at", cfg.at, "Issue time, e.g. 2018-01-08T12:00Z")->required();
    fc->add_option("--horizon", cfg.horizon_min, "Horizon in minutes (multiple of 15)");
    fc->add_option("--technique", technique, "tspa|mlp|gp|all");
    fc->add_option("--out", cfg.out_dir, "Directory for forecast CSVs ('-' to skip)");

    auto* bt = app.add_subcommand("backtest", "Rolling monthly backtest with full report");
    common(bt);
    data_flags(bt, false);
    bt->add_option("--out", cfg.out_dir, "Report directory");
    bt->add_option("--horizons", horizons, "Comma-separated horizons in minutes (multiples of 15)");
    bt->add_option("--technique", technique, "tspa|mlp|gp|all");
    bt->add_option("--stride", cfg.stride, "Issue a forecast every N quarters")->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    common(synth);
    synth->add_option("--quarters", cfg.quarters, "Number of quarters")->check(CLI::PositiveNumber);
    synth->add_option("--out", cfg.out_dir, "Output directory")->required();
    synth->add_flag("--jitter", cfg.jitter, "Draw NRV uniformly within bins instead of at centers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return usage;
    }

    CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    try {
        RunConfig flags = cfg;
        if (!config_file.empty()) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(detail::read_file(config_file));
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(std::string("cannot parse ") + config_file + ": " + e.what());
            }
            apply_overrides(cfg, j);
            // explicit flags win over the file
            for (const auto* o : sub->get_options()) {
                if (o->count() == 0) {
                    continue;
                }
                const std::string n = o->get_name();
                if (n == "--data") cfg.data_dir = flags.data_dir;
                if (n == "--out") cfg.out_dir = flags.out_dir;
                if (n == "--jobs") cfg.jobs = flags.jobs;
                if (n == "--seed") cfg.seed = flags.seed;
                if (n == "--stride") cfg.stride = flags.stride;
                if (n == "--quarters") cfg.quarters = flags.quarters;
                if (n == "--horizon") cfg.horizon_min = flags.horizon_min;
                if (n == "--at") cfg.at = flags.at;
                if (n == "--validation-start") cfg.validation_start = flags.validation_start;
                if (n == "--allow-gaps") cfg.allow_gaps = true;
                if (n == "--real-data") cfg.real_data = true;
                if (n == "--jitter") cfg.jitter = true;
            }
        }
        if (!horizons.empty()) {
            cfg.horizons_min = parse_horizons(horizons);
        }
        if (const auto* t = sub->get_option_no_throw("--technique"); t && (t->count() > 0 || config_file.empty())) {
            cfg.techniques = parse_techniques(technique);
        }
        if (sub->get_option("--seed")->count() > 0 && cfg.command != "synth") {
            cfg.mlp.seed = cfg.seed;
            cfg.gp.seed = cfg.seed;
        }
        cfg.validate();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::data ? data_error : model_error;
    }

    if (show_config) {
        out << to_json(cfg).dump(2) << "\n";
        return ok;
    }

    auto log = logger();
    try {
        log->debug("command {}", cfg.command);
        if (cfg.command == "validate") {
            return cmd_validate(cfg, out);
        }
        if (cfg.command == "estimate") {
            return cmd_estimate(cfg, out);
        }
        if (cfg.command == "forecast") {
            return cmd_forecast(cfg, out);
        }
        if (cfg.command == "backtest") {
            if (cfg.data_dir.empty()) {
                throw ConfigError("--data is required");
            }
            return cmd_backtest(cfg, out);
        }
        return cmd_synth(cfg, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::data ? data_error : model_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return model_error;
    }
}

} // namespace imbfc::cli
