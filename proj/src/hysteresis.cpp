#include "hysteresis.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace pisindy {

namespace {

double clip(double s, double r) {
    return std::min(r, std::max(-r, s));
}

void check_threshold(double r) {
    if (!std::isfinite(r) || r <= 0.0) {
        raise(ErrorCode::non_positive_threshold,
              "stop operator threshold must be finite and > 0");
    }
}

void check_sample(double x) {
    if (!std::isfinite(x)) {
        raise(ErrorCode::invalid_argument,
              "stop operator input sample must be finite");
    }
}

} // namespace

StopOperator::StopOperator(double r) : r_(r) {
    check_threshold(r);
}

double StopOperator::init(double x0) {
    check_sample(x0);
    y_ = clip(x0, r_);
    x_prev_ = x0;
    primed_ = true;
    return y_;
}

double StopOperator::step(double x) {
    if (!primed_) {
        raise(ErrorCode::protocol_misuse,
              "stop operator stepped before init");
    }
    check_sample(x);
    y_ = clip(x - x_prev_ + y_, r_);
    x_prev_ = x;
    return y_;
}

StopBank::StopBank(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)), y_(thresholds_.size(), 0.0) {
    if (thresholds_.empty()) {
        raise(ErrorCode::invalid_argument, "stop bank needs at least one threshold");
    }
    for (double r : thresholds_) check_threshold(r);
}

const std::vector<double>& StopBank::init(double x0) {
    check_sample(x0);
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        y_[i] = clip(x0, thresholds_[i]);
    }
    x_prev_ = x0;
    primed_ = true;
    return y_;
}

const std::vector<double>& StopBank::step(double x) {
    if (!primed_) {
        raise(ErrorCode::protocol_misuse, "stop bank stepped before init");
    }
    check_sample(x);
    const double dx = x - x_prev_;
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        y_[i] = clip(dx + y_[i], thresholds_[i]);
    }
    x_prev_ = x;
    return y_;
}

void StopBank::snapshot() {
    saved_y_ = y_;
    saved_x_prev_ = x_prev_;
    saved_primed_ = primed_;
    have_snapshot_ = true;
}

void StopBank::restore() {
    if (!have_snapshot_) {
        raise(ErrorCode::protocol_misuse, "stop bank restore without snapshot");
    }
    y_ = saved_y_;
    x_prev_ = saved_x_prev_;
    primed_ = saved_primed_;
}

std::vector<double> stop_response(const std::vector<double>& x, double r) {
    if (x.empty()) {
        raise(ErrorCode::empty_series, "stop operator needs at least one sample");
    }
    StopOperator op(r);
    std::vector<double> y;
    y.reserve(x.size());
    y.push_back(op.init(x[0]));
    for (std::size_t k = 1; k < x.size(); ++k) y.push_back(op.step(x[k]));
    return y;
}

std::vector<double> threshold_grid(std::size_t m, double x_max) {
    if (m == 0) {
        raise(ErrorCode::invalid_argument, "threshold grid needs m >= 1");
    }
    const double span = std::abs(x_max);
    if (!std::isfinite(span) || span <= 0.0) {
        raise(ErrorCode::degenerate_input,
              "threshold grid needs a nonzero peak displacement");
    }
    std::vector<double> r(m);
    for (std::size_t i = 1; i <= m; ++i) {
        r[i - 1] = (static_cast<double>(i) / static_cast<double>(m + 1)) * span;
    }
    return r;
}

} // namespace pisindy
