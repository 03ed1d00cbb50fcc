#pragma once

#include <imbfc/distribution.hpp>
#include <imbfc/market_data.hpp>
#include <imbfc/transition.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace imbfc {

/// Maps an NRV value to the volume left for the ARC-listed reserves after
/// the first 100 MW are absorbed by cross-border netting (IGCC).
inline double igcc_shift(double x) {
    if (x > 100.0) {
        return x - 100.0;
    }
    if (x < -100.0) {
        return x + 100.0;
    }
    return x;
}

/// ARC price at quarter `t` for the activation range holding `shifted_mw`.
inline double arc_price(const ArcTable& arc, QuarterIndex t, double shifted_mw) {
    return arc.at(t)[arc_range_index(shifted_mw)];
}

/// Two-step probabilistic forecaster: NRV transition rows pushed through the
/// IGCC shift and the ARC table of the delivery quarter.
class TspaModel {
public:
    TspaModel(TransitionMatrixSet tm, const ArcTable& arc) : tm_(std::move(tm)), arc_(&arc) {}

    const TransitionMatrixSet& transitions() const { return tm_; }
    const BinScheme& scheme() const { return tm_.scheme(); }
    const ArcTable& arc() const { return *arc_; }

private:
    TransitionMatrixSet tm_;
    const ArcTable* arc_;
};

/// Price distribution for delivery quarter t+k issued at t with NRV `current_nrv`.
inline DiscretePriceDistribution forecast(const TspaModel& model, QuarterIndex t, double current_nrv, int k) {
    const LeadMatrix& m = model.transitions().at(k);
    const std::size_t i = model.scheme().bin_index(current_nrv);
    const auto& prices = model.arc().at(t + k);
    std::vector<PriceAtom> atoms;
    atoms.reserve(m.n);
    for (std::size_t j = 0; j < m.n; ++j) {
        const double shifted = igcc_shift(model.scheme().center(j));
        atoms.push_back({prices[arc_range_index(shifted)], m(i, j)});
    }
    return make_discrete(std::move(atoms));
}

/// One distribution per lead time of the model, in lead-time order.
inline std::vector<DiscretePriceDistribution> forecast_horizon(const TspaModel& model, QuarterIndex t,
                                                               double current_nrv) {
    std::vector<DiscretePriceDistribution> out;
    for (int k : model.transitions().lead_times()) {
        out.push_back(forecast(model, t, current_nrv, k));
    }
    return out;
}

inline std::string atoms_json(const DiscretePriceDistribution& d) {
    std::string s = "[";
    for (std::size_t a = 0; a < d.atoms.size(); ++a) {
        s += (a ? ",[" : "[") + detail::format_double(d.atoms[a].price) + "," +
             detail::format_double(d.atoms[a].prob) + "]";
    }
    return s + "]";
}

inline constexpr const char* forecast_csv_header = "issue_time,lead_min,mean,std,atoms_json\n";

/// One CSV row of the forecast export format. `atoms` is quoted since it contains commas.
inline std::string forecast_csv_row(QuarterIndex issue, int lead, double mean, double std,
                                    const std::string& atoms = "[]") {
    return format_timestamp(issue) + "," + std::to_string(lead * minutes_per_quarter) + "," +
           detail::format_double(mean) + "," + (std::isnan(std) ? std::string() : detail::format_double(std)) +
           ",\"" + atoms + "\"\n";
}

inline std::string export_forecast_csv(QuarterIndex issue, const std::vector<int>& leads,
                                       const std::vector<DiscretePriceDistribution>& dists) {
    std::string out = forecast_csv_header;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        out += forecast_csv_row(issue, leads[i], dists[i].mean, dists[i].std, atoms_json(dists[i]));
    }
    return out;
}

} // namespace imbfc
