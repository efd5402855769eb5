#pragma once

#include <cstddef>
#include <vector>

namespace pisindy {

/// Rate-independent stop operator (elastic-perfectly-plastic element)
/// with threshold r. State advances one sample at a time:
///
///   y[0] = clip(x[0]),   y[k] = clip(x[k] - x[k-1] + y[k-1])
///
/// where clip(s) = min(r, max(-r, s)). The operator must be primed
/// with init() before step() is legal.
class StopOperator {
public:
    explicit StopOperator(double r);

    double threshold() const { return r_; }

    /// Resets the memory to the first sample and returns y[0].
    double init(double x0);

    /// Advances to the next sample and returns the updated output.
    double step(double x);

    double value() const { return y_; }

private:
    double r_;
    double y_ = 0.0;
    double x_prev_ = 0.0;
    bool primed_ = false;
};

/// Bank of stop operators over a shared input signal, one output per
/// threshold. Keeps a single copy of the previous input sample. A one
/// slot snapshot/restore pair supports trial steps that may be rolled
/// back by an iterative solver.
class StopBank {
public:
    explicit StopBank(std::vector<double> thresholds);

    std::size_t size() const { return thresholds_.size(); }
    const std::vector<double>& thresholds() const { return thresholds_; }

    const std::vector<double>& init(double x0);
    const std::vector<double>& step(double x);
    const std::vector<double>& values() const { return y_; }

    void snapshot();
    void restore();

private:
    std::vector<double> thresholds_;
    std::vector<double> y_;
    double x_prev_ = 0.0;
    bool primed_ = false;

    std::vector<double> saved_y_;
    double saved_x_prev_ = 0.0;
    bool saved_primed_ = false;
    bool have_snapshot_ = false;
};

/// Full response of one stop operator over a displacement record.
std::vector<double> stop_response(const std::vector<double>& x, double r);

/// Evenly spaced thresholds r_i = (i / (m + 1)) * |x_max| for
/// i = 1..m, all strictly inside (0, |x_max|).
std::vector<double> threshold_grid(std::size_t m, double x_max);

} // namespace pisindy
