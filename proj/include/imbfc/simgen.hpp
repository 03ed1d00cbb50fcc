#pragma once

#include <imbfc/binning.hpp>
#include <imbfc/error.hpp>
#include <imbfc/market_data.hpp>
#include <imbfc/tspa.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace imbfc {

enum class ArcMode { constant, random_walk };

/// Recipe for a synthetic dataset whose NRV is an exact Markov chain.
struct SynthSpec {
    BinScheme scheme = default_scheme();
    std::vector<double> transition; // N x N row-major, row-stochastic
    ArcMode arc_mode = ArcMode::constant;
    std::array<double, arc_range_count> base_prices{};
    double walk_step = 2.0; // EUR/MWh per quarter, random-walk mode
    SettlementParams settlement;
    std::size_t quarters = 0;
    std::uint64_t seed = 1;
    QuarterIndex start = quarter_from_date(2017, 1, 1);
    bool jitter_within_bins = false;

    void validate() const {
        const std::size_t n = scheme.n_bins();
        if (transition.size() != n * n) {
            throw SpecError("transition matrix must be " + std::to_string(n) + "x" + std::to_string(n));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p = transition[i * n + j];
                if (!(p >= 0.0 && p <= 1.0)) {
                    throw SpecError("transition probabilities must lie in [0, 1]");
                }
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-12) {
                throw SpecError("transition row " + std::to_string(i) + " sums to " + std::to_string(s));
            }
        }
        if (quarters == 0) {
            throw SpecError("synthetic dataset needs at least one quarter");
        }
        for (double p : base_prices) {
            if (!std::isfinite(p)) {
                throw SpecError("ARC base prices must be finite");
            }
        }
        if (!(walk_step >= 0.0)) {
            throw SpecError("walk step must be non-negative");
        }
        settlement.validate();
    }
};

/// Symmetric banded chain: `band[d]` is the probability of moving d bins
/// away in either direction; mass that would leave [0, n) stays on the
/// diagonal, so the matrix is doubly stochastic with a uniform stationary law.
inline std::vector<double> banded_transition(std::size_t n, const std::vector<double>& band = {0.4, 0.2, 0.1}) {
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < band.size(); ++d) {
            const auto id = static_cast<std::ptrdiff_t>(i);
            const auto dd = static_cast<std::ptrdiff_t>(d);
            for (std::ptrdiff_t j : d == 0 ? std::vector<std::ptrdiff_t>{id} : std::vector<std::ptrdiff_t>{id - dd, id + dd}) {
                if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) {
                    p[i * n + static_cast<std::size_t>(j)] += band[d];
                } else {
                    p[i * n + i] += band[d];
                }
            }
        }
    }
    return p;
}

/// Increasing ladder of activation prices: downward ranges from -20 to 40,
/// upward ranges from 50 to 130 EUR/MWh.
inline std::array<double, arc_range_count> default_arc_ladder() {
    std::array<double, arc_range_count> prices{};
    for (std::size_t p = 0; p < 11; ++p) {
        prices[p] = 40.0 - 6.0 * static_cast<double>(10 - p);
    }
    for (std::size_t p = 11; p < arc_range_count; ++p) {
        prices[p] = 50.0 + 8.0 * static_cast<double>(p - 11);
    }
    return prices;
}

inline SynthSpec default_synth_spec(std::size_t quarters, std::uint64_t seed) {
    SynthSpec spec;
    spec.transition = banded_transition(spec.scheme.n_bins());
    spec.base_prices = default_arc_ladder();
    spec.quarters = quarters;
    spec.seed = seed;
    return spec;
}

namespace detail {

inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t draw_row(std::mt19937_64& rng, const double* row, std::size_t n) {
    const double u = unit_draw(rng);
    double cum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cum += row[j];
        if (u < cum) {
            return j;
        }
    }
    // u landed in the rounding slack above the last partial sum
    for (std::size_t j = n; j-- > 0;) {
        if (row[j] > 0.0) {
            return j;
        }
    }
    return n - 1;
}

} // namespace detail

inline Dataset generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t n = spec.scheme.n_bins();
    std::mt19937_64 rng(spec.seed);
    Dataset d;
    d.series.start = spec.start;
    d.arc.start = spec.start;
    d.series.nrv_mw.resize(spec.quarters);
    d.series.pos_price.resize(spec.quarters);
    d.series.neg_price.resize(spec.quarters);
    d.series.filled.assign(spec.quarters, 0);
    d.arc.prices.resize(spec.quarters);

    std::size_t state = static_cast<std::size_t>(detail::unit_draw(rng) * static_cast<double>(n)) % n;
    std::array<double, arc_range_count> arc = spec.base_prices;
    const auto& edges = spec.scheme.edges();
    for (std::size_t t = 0; t < spec.quarters; ++t) {
        if (t > 0) {
            state = detail::draw_row(rng, spec.transition.data() + state * n, n);
        }
        double nrv = spec.scheme.center(state);
        if (spec.jitter_within_bins) {
            const double u = detail::unit_draw(rng);
            if (state == 0 || state + 1 == n) {
                nrv += (u - 0.5) * 100.0;
                nrv = state == 0 ? std::min(nrv, edges.front() - 1e-6) : std::max(nrv, edges.back());
            } else {
                nrv = edges[state - 1] + u * (edges[state] - edges[state - 1]);
            }
        }
        if (spec.arc_mode == ArcMode::random_walk && t > 0) {
            for (std::size_t p = 0; p < arc_range_count; ++p) {
                const double u = detail::unit_draw(rng);
                arc[p] += (2.0 * u - 1.0) * spec.walk_step - 0.01 * (arc[p] - spec.base_prices[p]);
            }
        }
        d.arc.prices[t] = arc;
        const double marginal = arc[arc_range_index(igcc_shift(nrv))];
        d.series.nrv_mw[t] = nrv;
        d.series.pos_price[t] = settle_prices(nrv, marginal, marginal, BrpPosition::long_position, spec.settlement);
        d.series.neg_price[t] = settle_prices(nrv, marginal, marginal, BrpPosition::short_position, spec.settlement);
    }
    d.metadata["source"] = "synthetic";
    d.metadata["seed"] = std::to_string(spec.seed);
    return d;
}

} // namespace imbfc
