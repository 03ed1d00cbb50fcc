#pragma once

#include <imbfc/detail/text.hpp>
#include <imbfc/error.hpp>
#include <imbfc/quarter.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace imbfc {

/// Number of ARC activation ranges: 11 downward, 11 upward, 100 MW wide.
inline constexpr std::size_t arc_range_count = 22;

/// Contiguous quarter-hourly NRV and imbalance prices.
///
/// `filled[i]` is set for rows that were forward-filled over a gap; those
/// rows never enter transition counting, training windows or scoring.
struct QuarterSeries {
    QuarterIndex start;
    std::vector<double> nrv_mw;
    std::vector<double> pos_price;
    std::vector<double> neg_price;
    std::vector<std::uint8_t> filled;

    std::size_t size() const { return nrv_mw.size(); }
    QuarterSpan span() const { return {start, start + static_cast<std::int64_t>(size())}; }
    std::size_t offset(QuarterIndex q) const { return static_cast<std::size_t>(q - start); }
    bool is_filled(std::size_t i) const { return !filled.empty() && filled[i] != 0; }
    std::size_t filled_count() const { return static_cast<std::size_t>(std::count(filled.begin(), filled.end(), 1)); }
};

/// Marginal activation prices per quarter. Column p (0-based) is activation range p+1.
struct ArcTable {
    QuarterIndex start;
    std::vector<std::array<double, arc_range_count>> prices;

    std::size_t size() const { return prices.size(); }
    QuarterSpan span() const { return {start, start + static_cast<std::int64_t>(size())}; }

    const std::array<double, arc_range_count>& at(QuarterIndex q) const {
        if (!span().contains(q)) {
            throw RangeError("no ARC prices for " + format_timestamp(q));
        }
        return prices[static_cast<std::size_t>(q - start)];
    }
};

/// 0-based ARC range holding `mw`.
///
/// Ranges partition the real line: (-inf,-1000], (-1000,-900], ..., (-100,0),
/// [0,100), ..., [900,1000), [1000,+inf). Zero belongs to the first upward range.
inline std::size_t arc_range_index(double mw) {
    if (mw >= 0.0) {
        const double bucket = std::floor(mw / 100.0);
        return 11 + static_cast<std::size_t>(std::min(bucket, 10.0));
    }
    // downward ranges are closed on the right: -100 belongs to (-200,-100]
    const double bucket = std::floor(-mw / 100.0) + 1.0; // 1 for (-100,0), 2 for (-200,-100], ...
    return 11 - static_cast<std::size_t>(std::min(bucket, 11.0));
}

struct Dataset {
    QuarterSeries series;
    ArcTable arc;
    std::map<std::string, std::string> metadata;
};

struct SettlementParams {
    double alpha_threshold_mw = 140.0;
    double alpha_slope = 0.0; // EUR/MWh per MW above the threshold

    void validate() const {
        if (!(alpha_threshold_mw >= 0.0) || !(alpha_slope >= 0.0)) {
            throw ValueError("settlement parameters must be non-negative");
        }
    }
};

enum class BrpPosition { long_position, short_position };

/// Imbalance tariff for a BRP given the quarter's NRV and marginal prices.
///
/// NRV >= 0 settles on MIP (short BRPs pay MIP + alpha), NRV < 0 on MDP
/// (long BRPs receive MDP - alpha). |NRV| stands in for the system imbalance
/// in the alpha rule.
inline double settle_prices(double nrv_mw, double mip, double mdp, BrpPosition position,
                            const SettlementParams& params = {}) {
    const double alpha = params.alpha_slope * std::max(0.0, std::abs(nrv_mw) - params.alpha_threshold_mw);
    if (nrv_mw >= 0.0) {
        return position == BrpPosition::short_position ? mip + alpha : mip;
    }
    return position == BrpPosition::long_position ? mdp - alpha : mdp;
}

enum class PriceMode { positive, mean };

inline double single_price(double pos, double neg, PriceMode mode = PriceMode::positive) {
    return mode == PriceMode::positive ? pos : 0.5 * (pos + neg);
}

inline std::vector<double> single_price_series(const QuarterSeries& s, PriceMode mode) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = single_price(s.pos_price[i], s.neg_price[i], mode);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

enum class CsvKind { nrv, prices, arc };

struct ParseOptions {
    bool allow_gaps = false; // forward-fill missing quarters and flag them
};

/// Columns of one quarter-hourly CSV file, sorted and gap-free.
struct QuarterColumns {
    CsvKind kind = CsvKind::nrv;
    QuarterIndex start;
    std::vector<std::vector<double>> columns;
    std::vector<std::uint8_t> filled;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    QuarterSpan span() const { return {start, start + static_cast<std::int64_t>(rows())}; }
};

inline std::vector<std::string> csv_header(CsvKind kind) {
    switch (kind) {
    case CsvKind::nrv:
        return {"timestamp_utc", "nrv_mw"};
    case CsvKind::prices:
        return {"timestamp_utc", "pos_price_eur_mwh", "neg_price_eur_mwh"};
    case CsvKind::arc: {
        std::vector<std::string> h{"timestamp_utc"};
        for (std::size_t p = 1; p <= arc_range_count; ++p) {
            h.push_back(p < 10 ? "p0" + std::to_string(p) : "p" + std::to_string(p));
        }
        return h;
    }
    }
    return {};
}

inline QuarterColumns parse_quarter_csv(std::string_view text, CsvKind kind, const ParseOptions& options = {}) {
    const auto expected = csv_header(kind);
    const auto lines = detail::split_lines(text);
    if (lines.empty()) {
        throw SchemaError("empty CSV");
    }
    const auto header = detail::split(lines.front());
    if (header.size() != expected.size() || !std::equal(header.begin(), header.end(), expected.begin())) {
        std::string want;
        for (const auto& h : expected) {
            want += (want.empty() ? "" : ",") + h;
        }
        throw SchemaError("unexpected header '" + std::string(lines.front()) + "', expected '" + want + "'");
    }
    const std::size_t ncol = expected.size() - 1;

    std::vector<std::pair<QuarterIndex, std::vector<double>>> rows;
    rows.reserve(lines.size());
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) {
            continue;
        }
        const auto fields = detail::split(lines[li]);
        const std::string ctx = "line " + std::to_string(li + 1);
        if (fields.size() != expected.size()) {
            throw SchemaError(ctx + ": expected " + std::to_string(expected.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        QuarterIndex q = parse_timestamp(fields[0]);
        std::vector<double> values(ncol);
        for (std::size_t c = 0; c < ncol; ++c) {
            values[c] = detail::parse_double(fields[c + 1], ctx);
        }
        rows.emplace_back(q, std::move(values));
    }
    if (rows.empty()) {
        throw SchemaError("CSV has no data rows");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    QuarterColumns out;
    out.kind = kind;
    out.start = rows.front().first;
    out.columns.assign(ncol, {});
    QuarterIndex expected_q = out.start;
    for (const auto& [q, values] : rows) {
        if (q < expected_q) {
            throw AlignmentError("duplicate timestamp " + format_timestamp(q));
        }
        while (expected_q < q) {
            if (!options.allow_gaps) {
                throw GapError("missing quarter " + format_timestamp(expected_q));
            }
            for (std::size_t c = 0; c < ncol; ++c) {
                out.columns[c].push_back(out.columns[c].back());
            }
            out.filled.push_back(1);
            expected_q += 1;
        }
        for (std::size_t c = 0; c < ncol; ++c) {
            out.columns[c].push_back(values[c]);
        }
        out.filled.push_back(0);
        expected_q += 1;
    }
    return out;
}

inline std::string serialize_quarter_csv(const QuarterColumns& cols) {
    std::string out;
    const auto header = csv_header(cols.kind);
    for (std::size_t i = 0; i < header.size(); ++i) {
        out += (i ? "," : "") + header[i];
    }
    out += '\n';
    for (std::size_t r = 0; r < cols.rows(); ++r) {
        out += format_timestamp(cols.start + static_cast<std::int64_t>(r));
        for (const auto& col : cols.columns) {
            out += ',';
            out += detail::format_double(col[r]);
        }
        out += '\n';
    }
    return out;
}

inline QuarterSeries make_series(const QuarterColumns& nrv, const QuarterColumns& prices) {
    if (nrv.kind != CsvKind::nrv || prices.kind != CsvKind::prices) {
        throw SchemaError("make_series expects NRV and price columns");
    }
    if (!(nrv.span() == prices.span())) {
        throw AlignmentError("NRV span [" + format_timestamp(nrv.span().begin) + ", " +
                             format_timestamp(nrv.span().end) + ") differs from price span [" +
                             format_timestamp(prices.span().begin) + ", " + format_timestamp(prices.span().end) +
                             ")");
    }
    QuarterSeries s;
    s.start = nrv.start;
    s.nrv_mw = nrv.columns[0];
    s.pos_price = prices.columns[0];
    s.neg_price = prices.columns[1];
    s.filled.resize(nrv.rows());
    for (std::size_t i = 0; i < s.filled.size(); ++i) {
        s.filled[i] = static_cast<std::uint8_t>(nrv.filled[i] | prices.filled[i]);
    }
    return s;
}

inline ArcTable make_arc_table(const QuarterColumns& arc) {
    if (arc.kind != CsvKind::arc || arc.columns.size() != arc_range_count) {
        throw SchemaError("ARC table needs exactly 22 price columns");
    }
    ArcTable t;
    t.start = arc.start;
    t.prices.resize(arc.rows());
    for (std::size_t r = 0; r < arc.rows(); ++r) {
        for (std::size_t p = 0; p < arc_range_count; ++p) {
            t.prices[r][p] = arc.columns[p][r];
        }
    }
    return t;
}

inline QuarterColumns nrv_columns(const QuarterSeries& s) {
    return {CsvKind::nrv, s.start, {s.nrv_mw}, s.filled};
}

inline QuarterColumns price_columns(const QuarterSeries& s) {
    return {CsvKind::prices, s.start, {s.pos_price, s.neg_price}, s.filled};
}

inline QuarterColumns arc_columns(const ArcTable& t) {
    QuarterColumns c{CsvKind::arc, t.start, std::vector<std::vector<double>>(arc_range_count), {}};
    for (std::size_t p = 0; p < arc_range_count; ++p) {
        c.columns[p].reserve(t.size());
        for (const auto& row : t.prices) {
            c.columns[p].push_back(row[p]);
        }
    }
    c.filled.assign(t.size(), 0);
    return c;
}

inline constexpr const char* nrv_file = "nrv.csv";
inline constexpr const char* prices_file = "prices.csv";
inline constexpr const char* arc_file = "arc.csv";

/// Loads `nrv.csv`, `prices.csv` and `arc.csv` from a directory.
inline Dataset load_dataset(const std::filesystem::path& dir, const ParseOptions& options = {}) {
    const auto nrv = parse_quarter_csv(detail::read_file(dir / nrv_file), CsvKind::nrv, options);
    const auto prices = parse_quarter_csv(detail::read_file(dir / prices_file), CsvKind::prices, options);
    const auto arc = parse_quarter_csv(detail::read_file(dir / arc_file), CsvKind::arc, options);
    Dataset d;
    d.series = make_series(nrv, prices);
    d.arc = make_arc_table(arc);
    if (!(d.series.span() == d.arc.span())) {
        throw AlignmentError("ARC span does not match the NRV/price span");
    }
    for (std::size_t i = 0; i < arc.rows(); ++i) {
        d.series.filled[i] |= arc.filled[i];
    }
    d.metadata["source"] = dir.string();
    return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
    detail::write_file(dir / nrv_file, serialize_quarter_csv(nrv_columns(d.series)));
    detail::write_file(dir / prices_file, serialize_quarter_csv(price_columns(d.series)));
    detail::write_file(dir / arc_file, serialize_quarter_csv(arc_columns(d.arc)));
}

} // namespace imbfc
