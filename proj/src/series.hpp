#pragma once

#include <string>
#include <vector>

namespace pisindy {

/// Paired time/displacement(/force) samples. The shared record of cyclic
/// tests, training data and pushover sweeps. Units: s, mm, kN.
struct SignalSeries {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> force; // empty when the series carries displacements only

    [[nodiscard]] std::size_t size() const { return x.size(); }
    [[nodiscard]] bool empty() const { return x.empty(); }
    [[nodiscard]] bool has_force() const { return !force.empty(); }

    /// Largest |x| over the series.
    [[nodiscard]] double peak_displacement() const;

    /// Enforces: t strictly increasing, equal lengths, finite samples.
    void validate() const;
};

/// CSV with header `t,x` or `t,x,R`.
SignalSeries load_series_csv(const std::string& path);
void save_series_csv(const SignalSeries& series, const std::string& path);

} // namespace pisindy
