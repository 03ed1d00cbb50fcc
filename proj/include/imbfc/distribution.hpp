#pragma once

#include <imbfc/error.hpp>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace imbfc {

struct PriceAtom {
    double price = 0.0; // EUR/MWh
    double prob = 0.0;

    bool operator==(const PriceAtom&) const = default;
};

/// Finite-support price distribution; atoms sorted by price, distinct, prob > 0.
struct DiscretePriceDistribution {
    std::vector<PriceAtom> atoms;
    double mean = 0.0;
    double std = 0.0;

    /// Generalized inverse CDF: smallest atom price with F(price) >= q.
    double quantile(double q) const {
        double cum = 0.0;
        for (const auto& a : atoms) {
            cum += a.prob;
            // guard against the last partial sum landing a hair under q
            if (cum >= q - 1e-12) {
                return a.price;
            }
        }
        return atoms.back().price;
    }
};

/// Sorts atoms, merges identical prices, drops zero-probability atoms and
/// computes the moments.
inline DiscretePriceDistribution make_discrete(std::vector<PriceAtom> atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const PriceAtom& a, const PriceAtom& b) { return a.price < b.price; });
    DiscretePriceDistribution d;
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.prob >= 0.0) || !std::isfinite(a.price)) {
            throw ValueError("invalid atom in discrete distribution");
        }
        total += a.prob;
        if (a.prob == 0.0) {
            continue;
        }
        if (!d.atoms.empty() && d.atoms.back().price == a.price) {
            d.atoms.back().prob += a.prob;
        } else {
            d.atoms.push_back(a);
        }
    }
    if (d.atoms.empty() || std::abs(total - 1.0) > 1e-9) {
        throw ValueError("discrete distribution probabilities must sum to 1");
    }
    for (const auto& a : d.atoms) {
        d.mean += a.prob * a.price;
    }
    double var = 0.0;
    for (const auto& a : d.atoms) {
        var += a.prob * (a.price - d.mean) * (a.price - d.mean);
    }
    d.std = std::sqrt(var);
    return d;
}

struct GaussianForecast {
    double mean = 0.0;
    double std = 0.0;

    double quantile(double q) const {
        if (std <= 0.0) {
            return mean;
        }
        return boost::math::quantile(boost::math::normal_distribution<double>(mean, std), q);
    }
};

struct PointForecast {
    double value = 0.0;
};

using Predictive = std::variant<PointForecast, GaussianForecast, DiscretePriceDistribution>;

inline double predictive_mean(const Predictive& p) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointForecast>) {
                return d.value;
            } else {
                return d.mean;
            }
        },
        p);
}

/// Standard deviation; NaN for point forecasts.
inline double predictive_std(const Predictive& p) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointForecast>) {
                return std::numeric_limits<double>::quiet_NaN();
            } else {
                return d.std;
            }
        },
        p);
}

inline bool is_probabilistic(const Predictive& p) { return !std::holds_alternative<PointForecast>(p); }

} // namespace imbfc
