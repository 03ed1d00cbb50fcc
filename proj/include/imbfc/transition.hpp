#pragma once

#include <imbfc/binning.hpp>
#include <imbfc/detail/text.hpp>
#include <imbfc/error.hpp>
#include <imbfc/market_data.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace imbfc {

/// Row-stochastic N x N matrix estimated for one lead time.
struct LeadMatrix {
    int lead = 0;                            // quarters
    std::size_t n = 0;
    std::vector<double> probs;               // row-major
    std::vector<std::uint64_t> origin_counts;
    std::vector<std::uint8_t> fallback;      // row had no origin samples; holds the marginal

    double operator()(std::size_t i, std::size_t j) const { return probs[i * n + j]; }
    std::span<const double> row(std::size_t i) const { return {probs.data() + i * n, n}; }
};

/// Moments of a discrete predictive distribution.
struct Moments {
    double mean = 0.0;
    double std = 0.0;
};

class TransitionMatrixSet {
public:
    TransitionMatrixSet(BinScheme scheme, std::vector<LeadMatrix> matrices, std::vector<double> marginal)
        : scheme_(std::move(scheme)), matrices_(std::move(matrices)), marginal_(std::move(marginal)) {}

    const BinScheme& scheme() const { return scheme_; }
    const std::vector<LeadMatrix>& matrices() const { return matrices_; }
    const std::vector<double>& marginal() const { return marginal_; }

    std::vector<int> lead_times() const {
        std::vector<int> out;
        for (const auto& m : matrices_) {
            out.push_back(m.lead);
        }
        return out;
    }

    bool has_lead(int k) const {
        return std::any_of(matrices_.begin(), matrices_.end(), [k](const LeadMatrix& m) { return m.lead == k; });
    }

    const LeadMatrix& at(int k) const {
        for (const auto& m : matrices_) {
            if (m.lead == k) {
                return m;
            }
        }
        throw RangeError("no transition matrix for lead time " + std::to_string(k));
    }

private:
    BinScheme scheme_;
    std::vector<LeadMatrix> matrices_;
    std::vector<double> marginal_;
};

/// Counts-based estimate of the per-lead-time NRV transition matrices:
///
///   p(i -> j | k) = #{t : v(t) in bin i, v(t+k) in bin j} / #{t : v(t) in bin i}
///
/// over pairs with both ends inside `window` (the whole series by default)
/// and neither end gap-filled. Origin bins with no samples get the marginal
/// bin distribution of the window and are flagged.
inline TransitionMatrixSet estimate_transitions(const QuarterSeries& series, const BinScheme& scheme,
                                                const std::vector<int>& lead_times,
                                                std::optional<QuarterSpan> window = std::nullopt) {
    if (lead_times.empty()) {
        throw ValueError("estimate_transitions: no lead times");
    }
    if (std::set<int>(lead_times.begin(), lead_times.end()).size() != lead_times.size()) {
        throw ValueError("estimate_transitions: lead times must be distinct");
    }
    for (int k : lead_times) {
        if (k <= 0) {
            throw ValueError("estimate_transitions: lead times must be positive");
        }
    }
    QuarterSpan span = window.value_or(series.span());
    span.begin = std::max(span.begin, series.span().begin);
    span.end = std::min(span.end, series.span().end);
    const std::int64_t len = std::max<std::int64_t>(0, span.size());
    const std::size_t first = len > 0 ? series.offset(span.begin) : 0;
    const std::size_t n = scheme.n_bins();

    std::vector<std::size_t> bins(static_cast<std::size_t>(len));
    std::vector<std::uint64_t> bin_counts(n, 0);
    std::uint64_t valid = 0;
    for (std::int64_t r = 0; r < len; ++r) {
        const std::size_t i = first + static_cast<std::size_t>(r);
        bins[static_cast<std::size_t>(r)] = scheme.bin_index(series.nrv_mw[i]);
        if (!series.is_filled(i)) {
            ++bin_counts[bins[static_cast<std::size_t>(r)]];
            ++valid;
        }
    }
    std::vector<double> marginal(n, 0.0);
    if (valid > 0) {
        for (std::size_t j = 0; j < n; ++j) {
            marginal[j] = static_cast<double>(bin_counts[j]) / static_cast<double>(valid);
        }
    }

    std::vector<LeadMatrix> matrices;
    for (int k : lead_times) {
        std::vector<std::uint64_t> counts(n * n, 0);
        std::uint64_t pairs = 0;
        for (std::int64_t r = 0; r + k < len; ++r) {
            const std::size_t a = first + static_cast<std::size_t>(r);
            const std::size_t b = a + static_cast<std::size_t>(k);
            if (series.is_filled(a) || series.is_filled(b)) {
                continue;
            }
            ++counts[bins[static_cast<std::size_t>(r)] * n + bins[static_cast<std::size_t>(r + k)]];
            ++pairs;
        }
        if (pairs == 0) {
            throw InsufficientDataError("no (t, t+" + std::to_string(k) + ") pairs in the learning set");
        }
        LeadMatrix m{k, n, std::vector<double>(n * n, 0.0), std::vector<std::uint64_t>(n, 0),
                     std::vector<std::uint8_t>(n, 0)};
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t total = 0;
            for (std::size_t j = 0; j < n; ++j) {
                total += counts[i * n + j];
            }
            m.origin_counts[i] = total;
            if (total == 0) {
                m.fallback[i] = 1;
                std::copy(marginal.begin(), marginal.end(), m.probs.begin() + static_cast<std::ptrdiff_t>(i * n));
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                m.probs[i * n + j] = static_cast<double>(counts[i * n + j]) / static_cast<double>(total);
            }
        }
        matrices.push_back(std::move(m));
    }
    return {scheme, std::move(matrices), std::move(marginal)};
}

/// Mean and standard deviation of a discrete distribution over `values`.
inline Moments discrete_moments(std::span<const double> probs, std::span<const double> values) {
    Moments m;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        m.mean += probs[j] * values[j];
    }
    double var = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        const double d = values[j] - m.mean;
        var += probs[j] * d * d;
    }
    m.std = std::sqrt(var);
    return m;
}

/// NRV mean/std forecast for lead `k` given the NRV observed at issue time.
inline Moments nrv_moments(const TransitionMatrixSet& tm, int k, double current_nrv) {
    const std::size_t i = tm.scheme().bin_index(current_nrv);
    return discrete_moments(tm.at(k).row(i), tm.scheme().centers());
}

/// Matrix for lead `k` as a labelled CSV (origin bins down, destination bins across).
inline std::string export_heatmap(const TransitionMatrixSet& tm, int k) {
    const LeadMatrix& m = tm.at(k);
    std::string out = "from\\to";
    for (std::size_t j = 0; j < m.n; ++j) {
        out += "," + tm.scheme().label(j);
    }
    out += '\n';
    for (std::size_t i = 0; i < m.n; ++i) {
        out += tm.scheme().label(i);
        for (std::size_t j = 0; j < m.n; ++j) {
            out += ',';
            out += detail::format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json to_json(const LeadMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.n; ++i) {
        rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    }
    return {{"k", m.lead}, {"rows", rows}, {"origin_counts", m.origin_counts}, {"fallback", m.fallback}};
}

inline nlohmann::json to_json(const TransitionMatrixSet& tm) {
    nlohmann::json mats = nlohmann::json::array();
    for (const auto& m : tm.matrices()) {
        mats.push_back(to_json(m));
    }
    return {{"version", 1}, {"scheme", to_json(tm.scheme())}, {"marginal", tm.marginal()}, {"matrices", mats}};
}

inline TransitionMatrixSet transition_set_from_json(const nlohmann::json& j) {
    try {
        BinScheme scheme = bin_scheme_from_json(j.at("scheme"));
        const std::size_t n = scheme.n_bins();
        std::vector<LeadMatrix> mats;
        for (const auto& jm : j.at("matrices")) {
            LeadMatrix m;
            m.lead = jm.at("k").get<int>();
            m.n = n;
            const auto rows = jm.at("rows").get<std::vector<std::vector<double>>>();
            if (rows.size() != n) {
                throw SchemaError("transition matrix has wrong row count");
            }
            for (const auto& r : rows) {
                if (r.size() != n) {
                    throw SchemaError("transition matrix has wrong column count");
                }
                m.probs.insert(m.probs.end(), r.begin(), r.end());
            }
            m.origin_counts = jm.value("origin_counts", std::vector<std::uint64_t>(n, 0));
            m.fallback = jm.value("fallback", std::vector<std::uint8_t>(n, 0));
            mats.push_back(std::move(m));
        }
        return {std::move(scheme), std::move(mats), j.at("marginal").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("transition JSON: ") + e.what());
    }
}

} // namespace imbfc
