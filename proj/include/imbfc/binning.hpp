#pragma once

#include <imbfc/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace imbfc {

/// Discretization of NRV (MW) into N bins.
///
/// Bins are half-open [lo, hi); the first bin is (-inf, edges[0]) and the
/// last is [edges[N-2], +inf). Each bin has a representative center used for
/// moment computation; tail bins use a value beyond the last finite edge.
class BinScheme {
public:
    BinScheme(std::vector<double> edges, std::vector<double> centers)
        : edges_(std::move(edges)), centers_(std::move(centers)) {
        validate();
    }

    std::size_t n_bins() const { return centers_.size(); }
    const std::vector<double>& edges() const { return edges_; }
    const std::vector<double>& centers() const { return centers_; }
    double center(std::size_t i) const { return centers_.at(i); }

    /// 0-based bin containing `v`.
    std::size_t bin_index(double v) const {
        if (!std::isfinite(v)) {
            throw ValueError("bin_index: non-finite NRV value");
        }
        return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), v) - edges_.begin());
    }

    std::string label(std::size_t i) const {
        auto fmt = [](double x) {
            std::string s = std::to_string(x);
            s.erase(s.find_last_not_of('0') + 1);
            if (s.ends_with('.')) {
                s.pop_back();
            }
            return s;
        };
        const std::string lo = i == 0 ? "-inf" : fmt(edges_[i - 1]);
        const std::string hi = i + 1 == n_bins() ? "+inf" : fmt(edges_[i]);
        return (i == 0 ? "(" : "[") + lo + ";" + hi + ")";
    }

    bool operator==(const BinScheme&) const = default;

private:
    void validate() const {
        if (centers_.empty() || centers_.size() != edges_.size() + 1) {
            throw ValueError("bin scheme needs N centers and N-1 edges");
        }
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            if (!std::isfinite(edges_[i]) || (i > 0 && !(edges_[i] > edges_[i - 1]))) {
                throw ValueError("bin edges must be finite and strictly increasing");
            }
        }
        for (std::size_t i = 0; i < centers_.size(); ++i) {
            if (!std::isfinite(centers_[i])) {
                throw ValueError("bin centers must be finite");
            }
            const bool above_lo = i == 0 || centers_[i] >= edges_[i - 1];
            const bool below_hi = i + 1 == centers_.size() || centers_[i] < edges_[i];
            if (!above_lo || !below_hi) {
                throw ValueError("bin center " + std::to_string(i) + " lies outside its bin");
            }
        }
    }

    std::vector<double> edges_;
    std::vector<double> centers_;
};

/// 22 bins aligned with the ARC activation ranges: edges every 100 MW from
/// -1000 to 1000, interior centers at midpoints, tail centers at +/-1100 MW.
inline BinScheme default_scheme() {
    std::vector<double> edges;
    for (int e = -1000; e <= 1000; e += 100) {
        edges.push_back(e);
    }
    std::vector<double> centers{-1100.0};
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        centers.push_back(0.5 * (edges[i] + edges[i + 1]));
    }
    centers.push_back(1100.0);
    return {std::move(edges), std::move(centers)};
}

inline nlohmann::json to_json(const BinScheme& s) {
    return {{"edges", s.edges()}, {"centers", s.centers()}};
}

inline BinScheme bin_scheme_from_json(const nlohmann::json& j) {
    try {
        return {j.at("edges").get<std::vector<double>>(), j.at("centers").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bin scheme JSON: ") + e.what());
    }
}

} // namespace imbfc
