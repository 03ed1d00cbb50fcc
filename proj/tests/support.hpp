#pragma once

#include <imbfc/imbfc.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace imbfc::test {

inline QuarterSeries series_of(const std::vector<double>& nrv, const std::vector<double>& price = {},
                               QuarterIndex start = quarter_from_date(2017, 1, 1)) {
    QuarterSeries s;
    s.start = start;
    s.nrv_mw = nrv;
    s.pos_price = price.empty() ? std::vector<double>(nrv.size(), 50.0) : price;
    s.neg_price = s.pos_price;
    s.filled.assign(nrv.size(), 0);
    return s;
}

inline ArcTable flat_arc(QuarterIndex start, std::size_t n, const std::array<double, arc_range_count>& prices) {
    ArcTable t;
    t.start = start;
    t.prices.assign(n, prices);
    return t;
}

/// Fresh scratch directory under the build tree, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("imbfc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Row-major k-step matrix P^k.
inline std::vector<double> matrix_power(const std::vector<double>& p, std::size_t n, int k) {
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out[i * n + i] = 1.0;
    }
    for (int step = 0; step < k; ++step) {
        std::vector<double> next(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < n; ++m) {
                const double a = out[i * n + m];
                if (a == 0.0) {
                    continue;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    next[i * n + j] += a * p[m * n + j];
                }
            }
        }
        out = std::move(next);
    }
    return out;
}

/// Energy form of the CRPS of a discrete law: E|X - y| - E|X - X'| / 2.
inline double energy_crps(const std::vector<double>& x, const std::vector<double>& w, double y) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        a += w[i] * std::abs(x[i] - y);
        for (std::size_t j = 0; j < x.size(); ++j) {
            b += w[i] * w[j] * std::abs(x[i] - x[j]);
        }
    }
    return a - 0.5 * b;
}

} // namespace imbfc::test
