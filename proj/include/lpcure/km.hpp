#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lpcure/errors.hpp"

namespace lpcure {

// Product-limit estimate.  Steps live at distinct event times; censoring
// positions are kept for plot ticks.
struct KmCurve {
    std::vector<double> time;    // distinct event times, ascending
    std::vector<double> surv;    // S(t) just after each event time
    std::vector<int> n_risk;     // at-risk count at each event time
    std::vector<int> n_event;    // events at each event time
    std::vector<double> censor_times;
    int n_total = 0;

    // Step-function evaluation; S(t) = 1 before the first event.
    double at(double t) const {
        double s = 1.0;
        for (std::size_t j = 0; j < time.size() && time[j] <= t; ++j) s = surv[j];
        return s;
    }
};

// Standard Kaplan-Meier with events preceding censorings at tied times.
// Callers convert cured subjects to censored at a finite time first.
inline KmCurve kaplan_meier(const std::vector<double>& times, const std::vector<bool>& events) {
    if (times.empty()) throw Error("kaplan_meier: empty input");
    if (times.size() != events.size()) throw Error("kaplan_meier: length mismatch");
    for (double t : times)
        if (!(t > 0.0) || std::isinf(t)) throw Error("kaplan_meier: times must be finite and positive");

    std::vector<std::size_t> idx(times.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (times[a] != times[b]) return times[a] < times[b];
        return events[a] > events[b];
    });

    KmCurve out;
    out.n_total = static_cast<int>(times.size());
    double s = 1.0;
    std::size_t at_risk = times.size();
    std::size_t k = 0;
    while (k < idx.size()) {
        const double t = times[idx[k]];
        int d = 0, c = 0;
        while (k < idx.size() && times[idx[k]] == t) {
            if (events[idx[k]]) ++d; else ++c;
            ++k;
        }
        if (d > 0) {
            s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            out.time.push_back(t);
            out.surv.push_back(s);
            out.n_risk.push_back(static_cast<int>(at_risk));
            out.n_event.push_back(d);
        }
        if (c > 0) out.censor_times.push_back(t);
        at_risk -= static_cast<std::size_t>(d + c);
    }
    return out;
}

}  // namespace lpcure
