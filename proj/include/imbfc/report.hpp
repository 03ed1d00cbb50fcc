#pragma once

#include <imbfc/backtest.hpp>
#include <imbfc/detail/text.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace imbfc {

namespace detail {

inline int table_rank(const std::string& model) {
    // row order of the published comparison table
    if (model == "MLP") {
        return 0;
    }
    if (model == "GP") {
        return 1;
    }
    if (model == "TSPA") {
        return 2;
    }
    return 3;
}

inline std::vector<const HorizonResult*> table_order(const BacktestResult& r) {
    std::vector<const HorizonResult*> rows;
    for (const auto& h : r.results) {
        rows.push_back(&h);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const HorizonResult* a, const HorizonResult* b) {
        if (a->scores.horizon != b->scores.horizon) {
            return a->scores.horizon < b->scores.horizon;
        }
        return table_rank(a->scores.model) < table_rank(b->scores.model);
    });
    return rows;
}

inline std::string dash_or(double v, int digits) { return std::isnan(v) ? "-" : format_fixed(v, digits); }

} // namespace detail

/// Scores for every (model, horizon, lead time).
inline std::string per_lead_csv(const BacktestResult& r) {
    std::string out = "model,horizon_min,lead_min,nmae,nrmse,plf,crps,n\n";
    for (const auto& h : r.results) {
        for (const auto& l : h.scores.leads) {
            out += h.scores.model + "," + std::to_string(h.scores.horizon * minutes_per_quarter) + "," +
                   std::to_string(l.lead * minutes_per_quarter) + "," + detail::format_fixed(l.nmae, 6) + "," +
                   detail::format_fixed(l.nrmse, 6) + "," + detail::format_fixed(l.plf, 6) + "," +
                   detail::format_fixed(l.crps, 6) + "," + std::to_string(l.n) + "\n";
        }
    }
    return out;
}

/// Lead-averaged scores, one row per (horizon, model), "-" where a score does not apply.
inline std::string table_csv(const BacktestResult& r) {
    std::string out = "horizon,technique,nmae,nrmse,plf,crps\n";
    for (const auto* h : detail::table_order(r)) {
        const LeadScore a = h->scores.average();
        out += std::to_string(h->scores.horizon * minutes_per_quarter) + " min," + h->scores.model + "," +
               detail::dash_or(a.nmae, 2) + "," + detail::dash_or(a.nrmse, 2) + "," + detail::dash_or(a.plf, 2) + "," +
               detail::dash_or(a.crps, 2) + "\n";
    }
    return out;
}

/// Lead-averaged scores per model across horizons, for score-versus-horizon plots.
inline std::string per_horizon_csv(const BacktestResult& r) {
    std::string out = "model,horizon_min,nmae,nrmse,plf,crps\n";
    for (const auto& h : r.results) {
        const LeadScore a = h.scores.average();
        out += h.scores.model + "," + std::to_string(h.scores.horizon * minutes_per_quarter) + "," +
               detail::format_fixed(a.nmae, 6) + "," + detail::format_fixed(a.nrmse, 6) + "," +
               detail::format_fixed(a.plf, 6) + "," + detail::format_fixed(a.crps, 6) + "\n";
    }
    return out;
}

inline std::string forecast_archive_csv(const HorizonResult& h) {
    std::string out = forecast_csv_header;
    for (const auto& f : h.archive) {
        out += forecast_csv_row(f.issue, f.lead, f.mean, f.std, f.atoms);
    }
    return out;
}

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart. NaN points break nothing: they are skipped.
inline std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<ChartSeries>& series) {
    constexpr double width = 640.0;
    constexpr double height = 400.0;
    constexpr double left = 70.0;
    constexpr double right = 130.0;
    constexpr double top = 40.0;
    constexpr double bottom = 50.0;
    static const std::array<const char*, 6> colors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isnan(s.y[i])) {
                continue;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x0 <= x1)) {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if (x1 == x0) {
        x1 = x0 + 1.0;
    }
    const double pad = y1 > y0 ? 0.05 * (y1 - y0) : 1.0;
    y0 -= pad;
    y1 += pad;
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto px = [&](double v) { return detail::format_fixed(left + (v - x0) / (x1 - x0) * pw, 2); };
    auto py = [&](double v) { return detail::format_fixed(top + (y1 - v) / (y1 - y0) * ph, 2); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
                      "font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::format_fixed(left + pw / 2, 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
           title + "</text>\n";
    svg += "<rect x=\"" + detail::format_fixed(left, 2) + "\" y=\"" + detail::format_fixed(top, 2) + "\" width=\"" +
           detail::format_fixed(pw, 2) + "\" height=\"" + detail::format_fixed(ph, 2) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y0 + (y1 - y0) * i / 4.0;
        const double xv = x0 + (x1 - x0) * i / 4.0;
        svg += "<text x=\"" + detail::format_fixed(left - 6, 2) + "\" y=\"" + py(yv) + "\" text-anchor=\"end\">" +
               detail::format_fixed(yv, 2) + "</text>\n";
        svg += "<text x=\"" + px(xv) + "\" y=\"" + detail::format_fixed(top + ph + 18, 2) +
               "\" text-anchor=\"middle\">" + detail::format_fixed(xv, 0) + "</text>\n";
    }
    svg += "<text x=\"" + detail::format_fixed(left + pw / 2, 2) + "\" y=\"" + detail::format_fixed(height - 10, 2) +
           "\" text-anchor=\"middle\">" + x_label + "</text>\n";
    svg += "<text x=\"16\" y=\"" + detail::format_fixed(top + ph / 2, 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           detail::format_fixed(top + ph / 2, 2) + ")\">" + y_label + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = colors[k % colors.size()];
        std::string points;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isnan(s.y[i])) {
                points += (points.empty() ? "" : " ") + px(s.x[i]) + "," + py(s.y[i]);
            }
        }
        if (points.empty()) {
            continue;
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
               "\"/>\n";
        const std::string ly = detail::format_fixed(top + 14.0 + 18.0 * static_cast<double>(k), 2);
        svg += "<line x1=\"" + detail::format_fixed(width - right + 10, 2) + "\" y1=\"" + ly + "\" x2=\"" +
               detail::format_fixed(width - right + 30, 2) + "\" y2=\"" + ly + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::format_fixed(width - right + 36, 2) + "\" y=\"" + ly + "\" dy=\"4\">" + s.name +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

/// Everything about a run that affects its numbers, for the report header.
inline nlohmann::json run_header(const BacktestResult& r, const BacktestConfig& cfg) {
    nlohmann::json j;
    const auto& s = cfg.schedule;
    j["origin"] = format_timestamp(s.origin);
    j["validation_start"] = format_timestamp(s.validation_start);
    j["validation_end"] = format_timestamp(s.validation_end());
    j["validation_quarters"] = r.validation_quarters;
    j["stride_quarters"] = s.stride;
    std::vector<int> hz;
    for (int h : s.horizons) {
        hz.push_back(h * minutes_per_quarter);
    }
    j["horizons_min"] = hz;
    std::vector<std::string> techs;
    for (Technique t : cfg.techniques) {
        techs.push_back(technique_name(t));
    }
    j["techniques"] = techs;
    j["normalizer"] = r.normalizer;
    j["price_mode"] = cfg.price_mode == PriceMode::positive ? "positive" : "mean";
    j["tspa_scoring"] = cfg.tspa_scoring == TspaScoring::native ? "native" : "gaussian";
    j["bins"] = to_json(cfg.scheme);
    j["mlp"] = {{"seed", cfg.mlp.seed},
                {"hidden", cfg.mlp.hidden},
                {"epochs", cfg.mlp.epochs},
                {"batch_size", cfg.mlp.batch_size},
                {"learning_rate", cfg.mlp.learning_rate},
                {"validation_fraction", cfg.mlp.validation_fraction},
                {"patience", cfg.mlp.patience},
                {"max_train_windows", cfg.mlp.max_train_windows}};
    j["gp"] = {{"seed", cfg.gp.seed},
               {"max_points", cfg.gp.max_points},
               {"optimize_points", cfg.gp.optimize_points},
               {"restarts", cfg.gp.restarts},
               {"max_iterations", cfg.gp.max_iterations},
               {"optimize", cfg.gp.optimize}};
    j["issued"] = r.issued;
    j["excluded"] = r.excluded;
    j["lookahead_violations"] = r.lookahead_violations;
    j["forecasts_checked"] = r.forecasts_checked;
    j["warnings"] = r.warnings;
    return j;
}

/// Writes the report tree under `out` and returns the written paths, relative to `out`.
inline std::vector<std::string> write_report(const BacktestResult& r, const BacktestConfig& cfg,
                                             const std::filesystem::path& out) {
    std::vector<std::string> written;
    auto put = [&](const std::string& rel, const std::string& content) {
        detail::write_file(out / rel, content);
        written.push_back(rel);
    };
    put("run.json", run_header(r, cfg).dump(2) + "\n");
    put("scores/per_lead.csv", per_lead_csv(r));
    put("scores/table.csv", table_csv(r));
    put("scores/per_horizon.csv", per_horizon_csv(r));

    if (r.first_transitions) {
        for (int k : cfg.heatmap_leads) {
            if (r.first_transitions->has_lead(k)) {
                put("heatmaps/transition_k" + std::to_string(k) + ".csv", export_heatmap(*r.first_transitions, k));
            }
        }
    }

    for (const auto& h : r.results) {
        if (cfg.archive != ArchiveMode::none) {
            put("forecasts/" + h.scores.model + "_" + std::to_string(h.scores.horizon * minutes_per_quarter) + "min.csv",
                forecast_archive_csv(h));
        }
    }

    static const std::array<std::pair<const char*, const char*>, 4> metrics{
        {{"nmae", "NMAE (%)"}, {"nrmse", "NRMSE (%)"}, {"plf", "PLF (EUR/MWh)"}, {"crps", "CRPS (EUR/MWh)"}}};
    std::vector<int> horizons;
    for (const auto& h : r.results) {
        if (std::find(horizons.begin(), horizons.end(), h.scores.horizon) == horizons.end()) {
            horizons.push_back(h.scores.horizon);
        }
    }
    for (int hz : horizons) {
        for (const auto& [key, label] : metrics) {
            std::vector<ChartSeries> series;
            for (const auto& h : r.results) {
                if (h.scores.horizon != hz) {
                    continue;
                }
                ChartSeries cs{h.scores.model, {}, {}};
                for (const auto& l : h.scores.leads) {
                    cs.x.push_back(l.lead * minutes_per_quarter);
                    const std::string m = key;
                    cs.y.push_back(m == "nmae" ? l.nmae : m == "nrmse" ? l.nrmse : m == "plf" ? l.plf : l.crps);
                }
                series.push_back(std::move(cs));
            }
            const std::string hm = std::to_string(hz * minutes_per_quarter);
            put(std::string("charts/") + key + "_" + hm + "min.svg",
                line_chart_svg(std::string(label) + " per lead time, horizon " + hm + " min", "lead time (min)", label,
                               series));
        }
    }
    return written;
}

} // namespace imbfc
