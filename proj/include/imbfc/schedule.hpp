#pragma once

#include <imbfc/error.hpp>
#include <imbfc/quarter.hpp>

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace imbfc {

enum class Technique { tspa, mlp, gp };

inline std::string technique_name(Technique t) {
    switch (t) {
    case Technique::tspa:
        return "TSPA";
    case Technique::mlp:
        return "MLP";
    case Technique::gp:
        return "GP";
    }
    return "?";
}

inline Technique parse_technique(const std::string& s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l == "tspa") {
        return Technique::tspa;
    }
    if (l == "mlp") {
        return Technique::mlp;
    }
    if (l == "gp") {
        return Technique::gp;
    }
    throw ValueError("unknown technique '" + s + "'");
}

/// How a technique's learning set grows from one monthly refit to the next.
enum class LearningPolicy {
    expanding,     // from the origin up to the forecast month
    sliding_month, // the calendar month before the forecast month only
};

inline LearningPolicy policy_for(Technique t) {
    return t == Technique::gp ? LearningPolicy::sliding_month : LearningPolicy::expanding;
}

/// Monthly-refit rolling evaluation over a validation period.
struct RollingSchedule {
    QuarterIndex origin;           // first quarter available for learning
    QuarterIndex validation_start; // first quarter of the first validation month
    int validation_months = 12;
    std::vector<int> horizons{1, 4, 24}; // quarters
    int stride = 1;                      // issue a forecast every `stride` quarters

    QuarterIndex validation_end() const { return add_months(validation_start, validation_months); }
    QuarterSpan validation_span() const { return {validation_start, validation_end()}; }
    int max_horizon() const { return *std::max_element(horizons.begin(), horizons.end()); }

    void validate() const {
        if (validation_months <= 0 || stride <= 0 || horizons.empty()) {
            throw ValueError("schedule needs positive validation months, stride and at least one horizon");
        }
        for (int h : horizons) {
            if (h <= 0) {
                throw ValueError("horizons must be positive quarter counts");
            }
        }
        if (month_start(validation_start) != validation_start) {
            throw ValueError("validation must start on a month boundary");
        }
    }
};

/// Origin at the data start, validation starting twelve months after the origin's month.
inline RollingSchedule default_schedule(QuarterSpan data) {
    RollingSchedule s;
    s.origin = data.begin;
    s.validation_start = add_months(month_start(data.begin), 12);
    return s;
}

/// One model refit: learn on `train`, issue forecasts during `predict`.
struct Vintage {
    Technique technique = Technique::tspa;
    int month = 0; // 0-based validation month
    QuarterSpan train;
    QuarterSpan predict;
};

/// Refit plan for each technique, in technique-then-month order.
inline std::vector<Vintage> plan(const RollingSchedule& schedule, QuarterSpan data,
                                 const std::vector<Technique>& techniques = {Technique::tspa, Technique::mlp,
                                                                             Technique::gp}) {
    schedule.validate();
    const QuarterIndex end = schedule.validation_end();
    if (data.begin > schedule.origin || data.end < end) {
        throw CoverageError("data [" + format_timestamp(data.begin) + ", " + format_timestamp(data.end) +
                            ") does not cover the learning origin " + format_timestamp(schedule.origin) +
                            " through the validation end " + format_timestamp(end));
    }
    if (add_months(schedule.validation_start, -1) < month_start(schedule.origin) ||
        schedule.validation_start <= schedule.origin) {
        throw CoverageError("no learning data before the validation start " +
                            format_timestamp(schedule.validation_start));
    }
    std::vector<Vintage> out;
    for (Technique t : techniques) {
        for (int m = 0; m < schedule.validation_months; ++m) {
            Vintage v;
            v.technique = t;
            v.month = m;
            v.predict = {add_months(schedule.validation_start, m), add_months(schedule.validation_start, m + 1)};
            if (policy_for(t) == LearningPolicy::expanding) {
                v.train = {schedule.origin, v.predict.begin};
            } else {
                v.train = {std::max(schedule.origin, add_months(v.predict.begin, -1)), v.predict.begin};
            }
            out.push_back(v);
        }
    }
    return out;
}

} // namespace imbfc
