#pragma once

#include <imbfc/backtest.hpp>
#include <imbfc/simgen.hpp>

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace imbfc {

/// Bad flags or configuration file; reported as a usage error.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Everything a CLI invocation needs, validated before any computation.
struct RunConfig {
    std::string command;
    std::string data_dir;
    std::string out_dir = "out";
    std::vector<int> horizons_min{15, 60, 360};
    std::uint64_t seed = 42;
    std::vector<Technique> techniques{Technique::tspa, Technique::mlp, Technique::gp};
    int jobs = 1;
    bool real_data = false;
    bool allow_gaps = false;

    // backtest
    std::optional<std::string> origin;           // default: first quarter of the data
    std::optional<std::string> validation_start; // default: twelve months after the origin
    int validation_months = 12;
    int stride = 1;
    std::optional<double> normalizer;
    PriceMode price_mode = PriceMode::positive;
    TspaScoring tspa_scoring = TspaScoring::native;
    ArchiveMode archive = ArchiveMode::daily_noon;
    MlpConfig mlp;
    GpConfig gp;

    // forecast / estimate
    std::optional<std::string> at;
    int horizon_min = 360;
    std::vector<int> heatmap_leads{1, 4};

    // synth
    std::size_t quarters = 100000;
    ArcMode arc_mode = ArcMode::constant;
    bool jitter = false;

    void validate() const {
        if (horizons_min.empty()) {
            throw ConfigError("at least one horizon is required");
        }
        for (int h : horizons_min) {
            if (h <= 0 || h % minutes_per_quarter != 0) {
                throw ConfigError("horizon " + std::to_string(h) + " min is not a positive multiple of 15");
            }
        }
        if (horizon_min <= 0 || horizon_min % minutes_per_quarter != 0) {
            throw ConfigError("forecast horizon must be a positive multiple of 15 minutes");
        }
        if (jobs < 1 || stride < 1 || validation_months < 1) {
            throw ConfigError("jobs, stride and validation_months must be positive");
        }
        if (techniques.empty()) {
            throw ConfigError("no technique selected");
        }
        if (normalizer && !(*normalizer > 0.0)) {
            throw ConfigError("normalizer must be positive");
        }
        if (quarters == 0) {
            throw ConfigError("quarters must be positive");
        }
        try {
            mlp.validate();
            gp.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }

    std::vector<int> horizons_quarters() const {
        std::vector<int> out;
        for (int h : horizons_min) {
            out.push_back(h / minutes_per_quarter);
        }
        return out;
    }
};

/// Comma-separated minutes, e.g. "15,60,360".
inline std::vector<int> parse_horizons(const std::string& text) {
    std::vector<int> out;
    for (auto part : detail::split(text, ',')) {
        int v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || p != part.data() + part.size() || v <= 0 || v % minutes_per_quarter != 0) {
            throw ConfigError("bad horizon '" + std::string(part) + "': expected minutes, a positive multiple of 15");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("empty horizon list");
    }
    return out;
}

inline std::vector<Technique> parse_techniques(const std::string& text) {
    if (text == "all") {
        return {Technique::tspa, Technique::mlp, Technique::gp};
    }
    std::vector<Technique> out;
    for (auto part : detail::split(text, ',')) {
        try {
            out.push_back(parse_technique(std::string(part)));
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    return out;
}

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["data"] = c.data_dir;
    j["out"] = c.out_dir;
    j["horizons"] = c.horizons_min;
    j["seed"] = c.seed;
    std::vector<std::string> techs;
    for (Technique t : c.techniques) {
        techs.push_back(technique_name(t));
    }
    j["techniques"] = techs;
    j["jobs"] = c.jobs;
    j["real_data"] = c.real_data;
    j["allow_gaps"] = c.allow_gaps;
    j["origin"] = c.origin ? nlohmann::json(*c.origin) : nlohmann::json(nullptr);
    j["validation_start"] = c.validation_start ? nlohmann::json(*c.validation_start) : nlohmann::json(nullptr);
    j["validation_months"] = c.validation_months;
    j["stride"] = c.stride;
    j["normalizer"] = c.normalizer ? nlohmann::json(*c.normalizer) : nlohmann::json(nullptr);
    j["price_mode"] = c.price_mode == PriceMode::positive ? "positive" : "mean";
    j["tspa_scoring"] = c.tspa_scoring == TspaScoring::native ? "native" : "gaussian";
    j["archive"] = c.archive == ArchiveMode::none ? "none" : c.archive == ArchiveMode::all ? "all" : "daily_noon";
    j["mlp"] = {{"seed", c.mlp.seed},
                {"hidden", c.mlp.hidden},
                {"epochs", c.mlp.epochs},
                {"batch_size", c.mlp.batch_size},
                {"learning_rate", c.mlp.learning_rate},
                {"validation_fraction", c.mlp.validation_fraction},
                {"patience", c.mlp.patience},
                {"tolerance", c.mlp.tolerance},
                {"max_train_windows", c.mlp.max_train_windows}};
    j["gp"] = {{"seed", c.gp.seed},
               {"max_points", c.gp.max_points},
               {"optimize_points", c.gp.optimize_points},
               {"restarts", c.gp.restarts},
               {"max_iterations", c.gp.max_iterations},
               {"optimize", c.gp.optimize},
               {"amplitude", c.gp.fixed.amplitude},
               {"length_scale", c.gp.fixed.length_scale},
               {"noise", c.gp.fixed.noise}};
    j["at"] = c.at ? nlohmann::json(*c.at) : nlohmann::json(nullptr);
    j["horizon"] = c.horizon_min;
    j["heatmap_leads"] = c.heatmap_leads;
    j["quarters"] = c.quarters;
    j["arc_mode"] = c.arc_mode == ArcMode::constant ? "constant" : "random_walk";
    j["jitter"] = c.jitter;
    return j;
}

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
    if (j.contains(key) && !j.at(key).is_null()) {
        dst = j.at(key).get<T>();
    }
}

template <typename T>
void take_optional(const nlohmann::json& j, const char* key, std::optional<T>& dst) {
    if (j.contains(key)) {
        if (j.at(key).is_null()) {
            dst.reset();
        } else {
            dst = j.at(key).get<T>();
        }
    }
}

inline void reject_unknown(const nlohmann::json& j, const nlohmann::json& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) {
            throw ConfigError("unknown configuration key '" + where + it.key() + "'");
        }
    }
}

} // namespace detail

/// Applies a JSON override document; keys mirror `to_json(RunConfig)`.
inline void apply_overrides(RunConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("configuration file must hold a JSON object");
    }
    const nlohmann::json known = to_json(c);
    detail::reject_unknown(j, known, "");
    try {
        detail::take(j, "data", c.data_dir);
        detail::take(j, "out", c.out_dir);
        detail::take(j, "horizons", c.horizons_min);
        detail::take(j, "seed", c.seed);
        if (j.contains("techniques")) {
            c.techniques.clear();
            for (const auto& t : j.at("techniques")) {
                c.techniques.push_back(parse_technique(t.get<std::string>()));
            }
        }
        detail::take(j, "jobs", c.jobs);
        detail::take(j, "real_data", c.real_data);
        detail::take(j, "allow_gaps", c.allow_gaps);
        detail::take_optional(j, "origin", c.origin);
        detail::take_optional(j, "validation_start", c.validation_start);
        detail::take(j, "validation_months", c.validation_months);
        detail::take(j, "stride", c.stride);
        detail::take_optional(j, "normalizer", c.normalizer);
        if (j.contains("price_mode")) {
            const auto v = j.at("price_mode").get<std::string>();
            if (v != "positive" && v != "mean") {
                throw ConfigError("price_mode must be 'positive' or 'mean'");
            }
            c.price_mode = v == "positive" ? PriceMode::positive : PriceMode::mean;
        }
        if (j.contains("tspa_scoring")) {
            const auto v = j.at("tspa_scoring").get<std::string>();
            if (v != "native" && v != "gaussian") {
                throw ConfigError("tspa_scoring must be 'native' or 'gaussian'");
            }
            c.tspa_scoring = v == "native" ? TspaScoring::native : TspaScoring::gaussian;
        }
        if (j.contains("archive")) {
            const auto v = j.at("archive").get<std::string>();
            if (v == "none") {
                c.archive = ArchiveMode::none;
            } else if (v == "all") {
                c.archive = ArchiveMode::all;
            } else if (v == "daily_noon") {
                c.archive = ArchiveMode::daily_noon;
            } else {
                throw ConfigError("archive must be 'none', 'daily_noon' or 'all'");
            }
        }
        if (j.contains("mlp")) {
            const auto& m = j.at("mlp");
            detail::reject_unknown(m, known.at("mlp"), "mlp.");
            detail::take(m, "seed", c.mlp.seed);
            detail::take(m, "hidden", c.mlp.hidden);
            detail::take(m, "epochs", c.mlp.epochs);
            detail::take(m, "batch_size", c.mlp.batch_size);
            detail::take(m, "learning_rate", c.mlp.learning_rate);
            detail::take(m, "validation_fraction", c.mlp.validation_fraction);
            detail::take(m, "patience", c.mlp.patience);
            detail::take(m, "tolerance", c.mlp.tolerance);
            detail::take(m, "max_train_windows", c.mlp.max_train_windows);
        }
        if (j.contains("gp")) {
            const auto& g = j.at("gp");
            detail::reject_unknown(g, known.at("gp"), "gp.");
            detail::take(g, "seed", c.gp.seed);
            detail::take(g, "max_points", c.gp.max_points);
            detail::take(g, "optimize_points", c.gp.optimize_points);
            detail::take(g, "restarts", c.gp.restarts);
            detail::take(g, "max_iterations", c.gp.max_iterations);
            detail::take(g, "optimize", c.gp.optimize);
            detail::take(g, "amplitude", c.gp.fixed.amplitude);
            detail::take(g, "length_scale", c.gp.fixed.length_scale);
            detail::take(g, "noise", c.gp.fixed.noise);
        }
        detail::take_optional(j, "at", c.at);
        detail::take(j, "horizon", c.horizon_min);
        detail::take(j, "heatmap_leads", c.heatmap_leads);
        detail::take(j, "quarters", c.quarters);
        if (j.contains("arc_mode")) {
            const auto v = j.at("arc_mode").get<std::string>();
            if (v != "constant" && v != "random_walk") {
                throw ConfigError("arc_mode must be 'constant' or 'random_walk'");
            }
            c.arc_mode = v == "constant" ? ArcMode::constant : ArcMode::random_walk;
        }
        detail::take(j, "jitter", c.jitter);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("configuration file: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

/// Backtest settings for a dataset covering `data`.
inline BacktestConfig backtest_config(const RunConfig& c, QuarterSpan data) {
    BacktestConfig b;
    b.schedule = default_schedule(data);
    if (c.origin) {
        b.schedule.origin = parse_timestamp(*c.origin);
        b.schedule.validation_start = add_months(month_start(b.schedule.origin), 12);
    }
    if (c.validation_start) {
        b.schedule.validation_start = parse_timestamp(*c.validation_start);
    }
    b.schedule.validation_months = c.validation_months;
    b.schedule.horizons = c.horizons_quarters();
    b.schedule.stride = c.stride;
    b.techniques = c.techniques;
    b.mlp = c.mlp;
    b.gp = c.gp;
    b.price_mode = c.price_mode;
    b.tspa_scoring = c.tspa_scoring;
    b.normalizer = c.normalizer;
    b.jobs = c.jobs;
    b.archive = c.archive;
    b.heatmap_leads = c.heatmap_leads;
    return b;
}

} // namespace imbfc
