#pragma once

#include <imbfc/binning.hpp>
#include <imbfc/distribution.hpp>
#include <imbfc/features.hpp>
#include <imbfc/gp.hpp>
#include <imbfc/market_data.hpp>
#include <imbfc/metrics.hpp>
#include <imbfc/mlp.hpp>
#include <imbfc/parallel.hpp>
#include <imbfc/schedule.hpp>
#include <imbfc/transition.hpp>
#include <imbfc/tspa.hpp>

#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace imbfc {

/// Which issued forecasts are kept for day-slice plots.
enum class ArchiveMode {
    none,
    daily_noon, // every forecast of the 15-min horizon, plus 12:00 UTC issues for longer horizons
    all,
};

/// How TSPA's discrete forecast is handed to PLF/CRPS.
enum class TspaScoring {
    native,   // the discrete distribution itself
    gaussian, // a normal with the same mean and std
};

struct BacktestConfig {
    RollingSchedule schedule;
    std::vector<Technique> techniques{Technique::tspa, Technique::mlp, Technique::gp};
    BinScheme scheme = default_scheme();
    MlpConfig mlp;
    GpConfig gp;
    PriceMode price_mode = PriceMode::positive;
    TspaScoring tspa_scoring = TspaScoring::native;
    std::optional<double> normalizer; // default: mean |price| over the validation span
    int jobs = 1;
    ArchiveMode archive = ArchiveMode::daily_noon;
    std::vector<int> heatmap_leads{1, 4};
    std::function<void(const std::string&)> progress;
};

struct ForecastRecord {
    QuarterIndex issue;
    int lead = 0;
    double mean = 0.0;
    double std = 0.0;
    std::string atoms = "[]";
};

struct HorizonResult {
    Technique technique = Technique::tspa;
    ScoreTable scores;
    std::vector<ForecastRecord> archive;
};

struct BacktestResult {
    std::vector<HorizonResult> results; // technique-major, horizons in schedule order
    double normalizer = reference_normalizer;
    std::size_t validation_quarters = 0;
    std::map<std::string, std::size_t> issued;   // per technique
    std::map<std::string, std::size_t> excluded; // per technique, quarters dropped on errors
    std::size_t lookahead_violations = 0;
    std::size_t forecasts_checked = 0;
    std::vector<std::string> warnings;
    std::optional<TransitionMatrixSet> first_transitions; // TSPA matrices of the first vintage

    const HorizonResult& at(Technique t, int horizon) const {
        for (const auto& r : results) {
            if (r.technique == t && r.scores.horizon == horizon) {
                return r;
            }
        }
        throw RangeError("no result for " + technique_name(t) + " at horizon " + std::to_string(horizon));
    }
};

namespace detail {

/// Everything one vintage contributes; merged in plan order so results do
/// not depend on thread scheduling.
struct VintageOutcome {
    std::vector<std::vector<ScoreAccumulator>> acc; // [horizon index][lead-1]
    std::vector<std::vector<ForecastRecord>> archive;
    std::size_t issued = 0;
    std::size_t excluded = 0;
    std::size_t violations = 0;
    std::size_t checked = 0;
    std::vector<std::string> warnings;
    std::optional<TransitionMatrixSet> transitions;
};

inline bool keep_in_archive(ArchiveMode mode, int horizon, QuarterIndex issue) {
    switch (mode) {
    case ArchiveMode::none:
        return false;
    case ArchiveMode::all:
        return true;
    case ArchiveMode::daily_noon:
        return horizon == 1 || minute_of_day(issue) == 12 * 60;
    }
    return false;
}

inline std::uint64_t vintage_seed(std::uint64_t base, int month, int horizon) {
    return base + 7919ULL * static_cast<std::uint64_t>(month + 1) + 104729ULL * static_cast<std::uint64_t>(horizon);
}

inline VintageOutcome run_vintage(const Vintage& v, const BacktestConfig& cfg, const Dataset& data,
                                  const std::vector<double>& prices) {
    const QuarterSeries& s = data.series;
    const RollingSchedule& sch = cfg.schedule;
    const QuarterIndex val_end = sch.validation_end();
    const int t_max = sch.max_horizon();
    VintageOutcome out;
    out.acc.resize(sch.horizons.size());
    out.archive.resize(sch.horizons.size());
    for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
        out.acc[h].resize(static_cast<std::size_t>(sch.horizons[h]));
    }

    std::vector<QuarterIndex> issues;
    for (QuarterIndex t = v.predict.begin; t < v.predict.end; t = t + sch.stride) {
        issues.push_back(t);
    }
    // the learning span must end before the forecast month starts
    if (!(v.train.end <= month_start(v.predict.begin)) || !(v.train.end <= v.predict.begin)) {
        out.violations += issues.size();
    }

    auto score = [&](std::size_t h, QuarterIndex t, int k, const Predictive& p) {
        const QuarterIndex target = t + k;
        if (target >= val_end || s.is_filled(s.offset(target))) {
            return;
        }
        out.acc[h][static_cast<std::size_t>(k - 1)].add(p, prices[s.offset(target)]);
        if (keep_in_archive(cfg.archive, sch.horizons[h], t)) {
            ForecastRecord r{t, k, predictive_mean(p), predictive_std(p), "[]"};
            if (const auto* d = std::get_if<DiscretePriceDistribution>(&p)) {
                r.atoms = atoms_json(*d);
            }
            out.archive[h].push_back(std::move(r));
        }
    };

    // issue times whose own inputs are usable; others are excluded
    auto inputs_ok = [&](QuarterIndex t, bool needs_history) {
        if (s.is_filled(s.offset(t))) {
            return false;
        }
        if (!needs_history) {
            return true;
        }
        if (t - s.start < history_quarters - 1) {
            return false;
        }
        for (int h = 0; h < history_quarters; ++h) {
            if (s.is_filled(s.offset(t - h))) {
                return false;
            }
        }
        return true;
    };

    const std::string tag = technique_name(v.technique) + " " + format_date(v.predict.begin);
    try {
        if (v.technique == Technique::tspa) {
            std::vector<int> leads(static_cast<std::size_t>(t_max));
            std::iota(leads.begin(), leads.end(), 1);
            TspaModel model(estimate_transitions(s, cfg.scheme, leads, v.train), data.arc);
            if (v.month == 0) {
                out.transitions = model.transitions();
            }
            for (QuarterIndex t : issues) {
                if (!inputs_ok(t, false)) {
                    ++out.excluded;
                    continue;
                }
                try {
                    ++out.checked; // only v(t) and the ARC table of t+k are read
                    for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
                        for (int k = 1; k <= sch.horizons[h] && t + k < val_end; ++k) {
                            auto d = forecast(model, t, s.nrv_mw[s.offset(t)], k);
                            if (cfg.tspa_scoring == TspaScoring::gaussian) {
                                score(h, t, k, GaussianForecast{d.mean, d.std});
                            } else {
                                score(h, t, k, std::move(d));
                            }
                        }
                    }
                    ++out.issued;
                } catch (const Error&) {
                    ++out.excluded;
                }
            }
            return out;
        }

        std::vector<QuarterIndex> usable;
        for (QuarterIndex t : issues) {
            if (inputs_ok(t, true)) {
                usable.push_back(t);
            } else {
                ++out.excluded;
            }
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(usable.size()), feature_count);
        for (std::size_t i = 0; i < usable.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = window_features(s, usable[i], cfg.price_mode);
        }
        out.checked += usable.size();
        out.issued += usable.size();

        auto check_windows = [&](const WindowSet& w, int horizon) {
            // every target used for learning lies strictly before the forecast month
            if (w.size() > 0 && !(w.issues.back() + horizon < v.train.end && w.issues.front() - (history_quarters - 1) >= v.train.begin)) {
                out.violations += usable.size();
            }
        };

        if (v.technique == Technique::mlp) {
            for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
                const int horizon = sch.horizons[h];
                const WindowSet w = build_windows(s, horizon, cfg.price_mode, v.train);
                check_windows(w, horizon);
                MlpConfig mc = cfg.mlp;
                mc.seed = vintage_seed(cfg.mlp.seed, v.month, horizon);
                const MlpModel model = mlp_train(w, mc);
                for (const auto& msg : model.warnings) {
                    out.warnings.push_back(tag + " T=" + std::to_string(horizon) + ": " + msg);
                }
                if (usable.empty()) {
                    continue;
                }
                const Eigen::MatrixXd pred = mlp_predict_batch(model, x);
                for (std::size_t i = 0; i < usable.size(); ++i) {
                    for (int k = 1; k <= horizon && usable[i] + k < val_end; ++k) {
                        score(h, usable[i], k, PointForecast{pred(static_cast<Eigen::Index>(i), k - 1)});
                    }
                }
            }
            return out;
        }

        // GP: the lead-k submodel does not depend on the horizon, so one
        // Direct-strategy fit up to the longest horizon serves all of them.
        const WindowSet w = build_windows(s, t_max, cfg.price_mode, v.train);
        check_windows(w, t_max);
        GpConfig gc = cfg.gp;
        gc.seed = vintage_seed(cfg.gp.seed, v.month, t_max);
        const GpModel model = gp_train_direct(w, t_max, gc);
        for (const auto& sub : model.submodels) {
            for (const auto& msg : sub.warnings) {
                out.warnings.push_back(tag + " k=" + std::to_string(sub.lead) + ": " + msg);
            }
        }
        if (usable.empty()) {
            return out;
        }
        for (int k = 1; k <= t_max; ++k) {
            const GpPrediction p = gp_predict_batch(model, x, k);
            for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
                if (k > sch.horizons[h]) {
                    continue;
                }
                for (std::size_t i = 0; i < usable.size(); ++i) {
                    if (usable[i] + k < val_end) {
                        const auto r = static_cast<Eigen::Index>(i);
                        score(h, usable[i], k, GaussianForecast{p.mean[r], p.std[r]});
                    }
                }
            }
        }
        for (auto& a : out.archive) {
            std::stable_sort(a.begin(), a.end(), [](const ForecastRecord& x1, const ForecastRecord& x2) {
                return x1.issue != x2.issue ? x1.issue < x2.issue : x1.lead < x2.lead;
            });
        }
    } catch (const Error& e) {
        out.warnings.push_back(tag + ": vintage failed: " + e.what());
        out.excluded += issues.size() - std::min(issues.size(), out.excluded);
        out.issued = 0;
        for (auto& h : out.acc) {
            for (auto& a : h) {
                a = {};
            }
        }
        for (auto& a : out.archive) {
            a.clear();
        }
    }
    return out;
}

} // namespace detail

/// Rolling-origin evaluation of every configured technique.
inline BacktestResult run(const BacktestConfig& cfg, const Dataset& data) {
    const RollingSchedule& sch = cfg.schedule;
    const auto vintages = plan(sch, data.series.span(), cfg.techniques);
    if (!(data.arc.span() == data.series.span())) {
        throw AlignmentError("ARC table and series spans differ");
    }
    const auto prices = single_price_series(data.series, cfg.price_mode);

    BacktestResult result;
    std::vector<double> val_prices;
    for (QuarterIndex t = sch.validation_start; t < sch.validation_end(); t = t + 1) {
        const std::size_t i = data.series.offset(t);
        if (!data.series.is_filled(i)) {
            val_prices.push_back(prices[i]);
        }
    }
    result.validation_quarters = static_cast<std::size_t>(sch.validation_span().size());
    result.normalizer = cfg.normalizer.value_or(mean_absolute(val_prices));
    if (!(result.normalizer > 0.0)) {
        throw ValueError("normalizer must be positive");
    }

    std::vector<detail::VintageOutcome> outcomes(vintages.size());
    parallel_for(vintages.size(), cfg.jobs, [&](std::size_t i) {
        outcomes[i] = detail::run_vintage(vintages[i], cfg, data, prices);
        if (cfg.progress) {
            cfg.progress(technique_name(vintages[i].technique) + " vintage " + format_date(vintages[i].predict.begin) +
                         " done");
        }
    });

    for (Technique tech : cfg.techniques) {
        const std::string name = technique_name(tech);
        std::vector<std::vector<ScoreAccumulator>> acc(sch.horizons.size());
        std::vector<HorizonResult> per_h(sch.horizons.size());
        for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
            acc[h].resize(static_cast<std::size_t>(sch.horizons[h]));
        }
        result.issued[name] = 0;
        result.excluded[name] = 0;
        for (std::size_t i = 0; i < vintages.size(); ++i) {
            if (vintages[i].technique != tech) {
                continue;
            }
            auto& o = outcomes[i];
            for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
                for (std::size_t k = 0; k < acc[h].size(); ++k) {
                    const auto& src = o.acc[h][k];
                    auto& dst = acc[h][k];
                    dst.abs_sum += src.abs_sum;
                    dst.sq_sum += src.sq_sum;
                    dst.plf_sum += src.plf_sum;
                    dst.crps_sum += src.crps_sum;
                    dst.n += src.n;
                    dst.n_probabilistic += src.n_probabilistic;
                }
                auto& arch = per_h[h].archive;
                arch.insert(arch.end(), std::make_move_iterator(o.archive[h].begin()),
                            std::make_move_iterator(o.archive[h].end()));
            }
            result.issued[name] += o.issued;
            result.excluded[name] += o.excluded;
            result.lookahead_violations += o.violations;
            result.forecasts_checked += o.checked;
            result.warnings.insert(result.warnings.end(), o.warnings.begin(), o.warnings.end());
            if (o.transitions && !result.first_transitions) {
                result.first_transitions = std::move(o.transitions);
            }
        }
        for (std::size_t h = 0; h < sch.horizons.size(); ++h) {
            per_h[h].technique = tech;
            per_h[h].scores.model = name;
            per_h[h].scores.horizon = sch.horizons[h];
            per_h[h].scores.normalizer = result.normalizer;
            for (std::size_t k = 0; k < acc[h].size(); ++k) {
                per_h[h].scores.leads.push_back(finalize(acc[h][k], static_cast<int>(k + 1), result.normalizer));
            }
            result.results.push_back(std::move(per_h[h]));
        }
    }
    return result;
}

} // namespace imbfc
