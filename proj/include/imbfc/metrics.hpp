#pragma once

#include <imbfc/distribution.hpp>
#include <imbfc/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace imbfc {

/// Mean absolute 2018 imbalance price used as NMAE/NRMSE normalizer in the reference study (EUR/MWh).
inline constexpr double reference_normalizer = 55.02;

struct ErrorScores {
    double nmae = 0.0;  // percent
    double nrmse = 0.0; // percent
};

inline ErrorScores nmae_nrmse(std::span<const double> predictions, std::span<const double> actuals,
                              double normalizer) {
    if (predictions.empty() || predictions.size() != actuals.size()) {
        throw EmptyInput("nmae_nrmse: need equal, non-empty prediction and actual sequences");
    }
    if (!(normalizer > 0.0)) {
        throw ValueError("nmae_nrmse: normalizer must be positive");
    }
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - actuals[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(predictions.size());
    return {100.0 * abs_sum / n / normalizer, 100.0 * std::sqrt(sq_sum / n) / normalizer};
}

/// Mean absolute actual, the default normalizer.
inline double mean_absolute(std::span<const double> actuals) {
    if (actuals.empty()) {
        throw EmptyInput("mean_absolute: empty input");
    }
    double s = 0.0;
    for (double a : actuals) {
        s += std::abs(a);
    }
    return s / static_cast<double>(actuals.size());
}

inline double pinball(double q, double predicted_quantile, double actual) {
    return actual >= predicted_quantile ? q * (actual - predicted_quantile)
                                        : (1.0 - q) * (predicted_quantile - actual);
}

/// Quantile levels 0.01, 0.02, ..., 0.99.
inline const std::vector<double>& quantile_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g;
        for (int i = 1; i <= 99; ++i) {
            g.push_back(i / 100.0);
        }
        return g;
    }();
    return grid;
}

/// Mean pinball loss over the 99-level grid, quantiles taken from the forecast's
/// own distribution. NaN for point forecasts.
inline double plf_score(const Predictive& forecast, double actual) {
    return std::visit(
        [actual](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointForecast>) {
                return std::numeric_limits<double>::quiet_NaN();
            } else {
                double s = 0.0;
                for (double q : quantile_grid()) {
                    s += pinball(q, d.quantile(q), actual);
                }
                return s / static_cast<double>(quantile_grid().size());
            }
        },
        forecast);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// Closed-form CRPS of N(mean, sd^2) at `actual`.
inline double crps_gaussian(double mean, double sd, double actual) {
    if (sd <= 0.0) {
        return std::abs(actual - mean);
    }
    const double z = (actual - mean) / sd;
    return sd * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - 1.0 / std::sqrt(std::numbers::pi));
}

/// Exact integral of (F(x) - 1[x >= actual])^2 for a step CDF.
inline double crps_discrete(const DiscretePriceDistribution& d, double actual) {
    double total = 0.0;
    double cdf = 0.0;
    bool passed = false; // past the actual
    double prev = 0.0;
    bool started = false;
    auto segment = [&](double to) {
        if (started) {
            const double h = passed ? 1.0 : 0.0;
            total += (cdf - h) * (cdf - h) * (to - prev);
        }
        prev = to;
        started = true;
    };
    for (const auto& a : d.atoms) {
        if (!passed && actual < a.price) {
            segment(actual);
            passed = true;
        }
        segment(a.price);
        cdf += a.prob;
    }
    if (!passed) {
        segment(actual);
    }
    return total;
}

inline double crps(const Predictive& forecast, double actual) {
    return std::visit(
        [actual](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointForecast>) {
                return std::abs(actual - d.value);
            } else if constexpr (std::is_same_v<T, GaussianForecast>) {
                return crps_gaussian(d.mean, d.std, actual);
            } else {
                return crps_discrete(d, actual);
            }
        },
        forecast);
}

/// Running sums for one (model, horizon, lead) cell.
struct ScoreAccumulator {
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double plf_sum = 0.0;
    double crps_sum = 0.0;
    std::size_t n = 0;
    std::size_t n_probabilistic = 0;

    void add(const Predictive& forecast, double actual) {
        const double e = predictive_mean(forecast) - actual;
        abs_sum += std::abs(e);
        sq_sum += e * e;
        ++n;
        if (is_probabilistic(forecast)) {
            plf_sum += plf_score(forecast, actual);
            crps_sum += crps(forecast, actual);
            ++n_probabilistic;
        }
    }
};

struct LeadScore {
    int lead = 0; // quarters
    double nmae = 0.0;
    double nrmse = 0.0;
    double plf = std::numeric_limits<double>::quiet_NaN();
    double crps = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

inline LeadScore finalize(const ScoreAccumulator& acc, int lead, double normalizer) {
    LeadScore s;
    s.lead = lead;
    s.n = acc.n;
    if (acc.n == 0) {
        s.nmae = s.nrmse = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    const double n = static_cast<double>(acc.n);
    s.nmae = 100.0 * acc.abs_sum / n / normalizer;
    s.nrmse = 100.0 * std::sqrt(acc.sq_sum / n) / normalizer;
    if (acc.n_probabilistic > 0) {
        s.plf = acc.plf_sum / static_cast<double>(acc.n_probabilistic);
        s.crps = acc.crps_sum / static_cast<double>(acc.n_probabilistic);
    }
    return s;
}

/// Per-lead-time scores of one technique at one horizon.
struct ScoreTable {
    std::string model;
    int horizon = 0; // quarters
    double normalizer = reference_normalizer;
    std::vector<LeadScore> leads;

    /// Arithmetic mean over lead times of each score (NaN stays NaN).
    LeadScore average() const {
        LeadScore avg;
        avg.lead = 0;
        if (leads.empty()) {
            avg.nmae = avg.nrmse = std::numeric_limits<double>::quiet_NaN();
            return avg;
        }
        const double n = static_cast<double>(leads.size());
        avg.plf = 0.0;
        avg.crps = 0.0;
        for (const auto& l : leads) {
            avg.nmae += l.nmae / n;
            avg.nrmse += l.nrmse / n;
            avg.plf += l.plf / n;
            avg.crps += l.crps / n;
            avg.n += l.n;
        }
        return avg;
    }
};

} // namespace imbfc
