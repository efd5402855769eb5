#include "series.hpp"

#include <cmath>

#include "csv.hpp"
#include "errors.hpp"

namespace pisindy {

double SignalSeries::peak_displacement() const {
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    return peak;
}

void SignalSeries::validate() const {
    if (x.empty()) raise(ErrorCode::empty_series, "series has no samples");
    if (t.size() != x.size())
        raise(ErrorCode::length_mismatch, "time and displacement lengths differ");
    if (has_force() && force.size() != x.size())
        raise(ErrorCode::length_mismatch, "force and displacement lengths differ");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]) || !std::isfinite(x[i]) ||
            (has_force() && !std::isfinite(force[i])))
            raise(ErrorCode::invalid_argument, "series contains a non-finite sample");
        if (i > 0 && !(t[i] > t[i - 1]))
            raise(ErrorCode::invalid_argument, "time stamps must be strictly increasing");
    }
}

SignalSeries load_series_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    const auto* t = table.find("t");
    const auto* x = table.find("x");
    if (!t || !x)
        raise(ErrorCode::malformed_file, "'" + path + "': expected header t,x[,R]");
    SignalSeries series;
    series.t = *t;
    series.x = *x;
    if (const auto* r = table.find("R")) series.force = *r;
    series.validate();
    return series;
}

void save_series_csv(const SignalSeries& series, const std::string& path) {
    series.validate();
    CsvTable table;
    table.headers = {"t", "x"};
    table.columns = {series.t, series.x};
    if (series.has_force()) {
        table.headers.push_back("R");
        table.columns.push_back(series.force);
    }
    write_csv(path, table);
}

} // namespace pisindy
