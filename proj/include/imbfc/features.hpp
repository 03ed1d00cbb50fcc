#pragma once

#include <imbfc/error.hpp>
#include <imbfc/market_data.hpp>

#include <Eigen/Dense>

#include <json.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace imbfc {

inline constexpr int history_quarters = 96; // 24 h
inline constexpr int feature_count = 2 * history_quarters;

/// One supervised sample: the last 24 h of prices then NRV (oldest first,
/// issue quarter last) and the prices at t+1..t+T.
struct FeatureWindow {
    QuarterIndex issue;
    std::vector<double> features;
    std::vector<double> targets;
};

/// Windows stacked row-wise.
struct WindowSet {
    std::vector<QuarterIndex> issues;
    Eigen::MatrixXd features; // n x 192
    Eigen::MatrixXd targets;  // n x T

    std::size_t size() const { return issues.size(); }
    int horizon() const { return static_cast<int>(targets.cols()); }

    FeatureWindow window(std::size_t i) const {
        const auto r = static_cast<Eigen::Index>(i);
        FeatureWindow w{issues[i], std::vector<double>(feature_count), std::vector<double>(targets.cols())};
        Eigen::Map<Eigen::RowVectorXd>(w.features.data(), feature_count) = features.row(r);
        Eigen::Map<Eigen::RowVectorXd>(w.targets.data(), targets.cols()) = targets.row(r);
        return w;
    }

    WindowSet subset(const std::vector<std::size_t>& rows) const {
        WindowSet out;
        out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
        out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.issues.push_back(issues[rows[i]]);
            out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
            out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(rows[i]));
        }
        return out;
    }
};

namespace detail {

/// filled_prefix[i] = number of filled rows in [0, i).
inline std::vector<std::size_t> filled_prefix(const QuarterSeries& s) {
    std::vector<std::size_t> p(s.size() + 1, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        p[i + 1] = p[i] + (s.is_filled(i) ? 1 : 0);
    }
    return p;
}

} // namespace detail

/// Feature vector for issue quarter `t`; needs t-95..t inside the series.
inline Eigen::RowVectorXd window_features(const QuarterSeries& s, QuarterIndex t, PriceMode mode = PriceMode::positive) {
    if (t - s.start < history_quarters - 1 || !s.span().contains(t)) {
        throw InsufficientDataError("not enough history before " + format_timestamp(t));
    }
    const std::size_t last = s.offset(t);
    const std::size_t first = last + 1 - history_quarters;
    Eigen::RowVectorXd f(feature_count);
    for (int h = 0; h < history_quarters; ++h) {
        const std::size_t i = first + static_cast<std::size_t>(h);
        f[h] = single_price(s.pos_price[i], s.neg_price[i], mode);
        f[history_quarters + h] = s.nrv_mw[i];
    }
    return f;
}

/// All windows whose extent [t-95, t+T] lies inside `span` (default: the
/// whole series) and touches no gap-filled row.
inline WindowSet build_windows(const QuarterSeries& s, int horizon, PriceMode mode = PriceMode::positive,
                               std::optional<QuarterSpan> span = std::nullopt) {
    if (horizon <= 0) {
        throw ValueError("build_windows: horizon must be positive");
    }
    QuarterSpan sp = span.value_or(s.span());
    sp.begin = std::max(sp.begin, s.span().begin);
    sp.end = std::min(sp.end, s.span().end);
    const auto prefix = detail::filled_prefix(s);

    std::vector<std::size_t> valid;
    if (sp.size() >= history_quarters + horizon) {
        const std::size_t lo = s.offset(sp.begin) + history_quarters - 1;
        const std::size_t hi = s.offset(sp.end) - static_cast<std::size_t>(horizon); // exclusive
        for (std::size_t t = lo; t < hi; ++t) {
            const std::size_t a = t + 1 - history_quarters;
            const std::size_t b = t + static_cast<std::size_t>(horizon) + 1;
            if (prefix[b] == prefix[a]) {
                valid.push_back(t);
            }
        }
    }
    if (valid.empty()) {
        throw InsufficientDataError("no complete " + std::to_string(history_quarters) + "+" +
                                    std::to_string(horizon) + " quarter window in the learning set");
    }
    WindowSet w;
    w.features.resize(static_cast<Eigen::Index>(valid.size()), feature_count);
    w.targets.resize(static_cast<Eigen::Index>(valid.size()), horizon);
    for (std::size_t r = 0; r < valid.size(); ++r) {
        const std::size_t t = valid[r];
        const QuarterIndex q = s.start + static_cast<std::int64_t>(t);
        w.issues.push_back(q);
        w.features.row(static_cast<Eigen::Index>(r)) = window_features(s, q, mode);
        for (int k = 1; k <= horizon; ++k) {
            const std::size_t i = t + static_cast<std::size_t>(k);
            w.targets(static_cast<Eigen::Index>(r), k - 1) = single_price(s.pos_price[i], s.neg_price[i], mode);
        }
    }
    return w;
}

/// Column-wise z-scoring with training statistics; constant columns keep std 1.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        const double n = static_cast<double>(x.rows());
        s.mean = x.colwise().mean();
        s.std.resize(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double var = (x.col(c).array() - s.mean[c]).square().sum() / n;
            const double sd = std::sqrt(var);
            s.std[c] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])) ? sd : 1.0;
        }
        return s;
    }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean).array().rowwise() / std.array();
    }

    Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const {
        return (z.array().rowwise() * std.array()).rowwise() + mean.array();
    }
};

inline nlohmann::json to_json(const Standardizer& s) {
    return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
            {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("std").get<std::vector<double>>();
    Standardizer out;
    out.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    out.std = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return out;
}

} // namespace imbfc
