#include "materials.hpp"

#include <cmath>

#include "errors.hpp"

namespace pisindy {

namespace {

void check_sample(double x) {
    if (!std::isfinite(x)) {
        raise(ErrorCode::invalid_argument,
              "material displacement must be finite");
    }
}

} // namespace

BilinearMaterial::BilinearMaterial(double k1, double k2, double dy)
    : k1_(k1), k2_(k2), dy_(dy),
      hardening_(k1 * k2 / (k1 - k2)), fy_(k1 * dy) {
    if (!std::isfinite(k1) || !std::isfinite(k2) || !std::isfinite(dy) ||
        k1 <= 0.0 || k2 < 0.0 || k2 >= k1 || dy <= 0.0) {
        raise(ErrorCode::invalid_argument,
              "bilinear material needs k1 > k2 >= 0 and dy > 0");
    }
}

double BilinearMaterial::update(double x) {
    const double trial = k1_ * (x - xp_);
    const double rel = trial - hardening_ * xp_; // distance from back stress
    const double over = std::abs(rel) - fy_;
    if (over > 0.0) {
        const double dgamma = over / (k1_ + hardening_);
        xp_ += dgamma * (rel > 0.0 ? 1.0 : -1.0);
        return k1_ * (x - xp_);
    }
    return trial;
}

double BilinearMaterial::init(double x0) {
    check_sample(x0);
    xp_ = 0.0;
    primed_ = true;
    return update(x0);
}

double BilinearMaterial::step(double x) {
    if (!primed_) {
        raise(ErrorCode::protocol_misuse, "material stepped before init");
    }
    check_sample(x);
    return update(x);
}

void BilinearMaterial::snapshot() {
    saved_xp_ = xp_;
    saved_primed_ = primed_;
    have_snapshot_ = true;
}

void BilinearMaterial::restore() {
    if (!have_snapshot_) {
        raise(ErrorCode::protocol_misuse, "restore without snapshot");
    }
    xp_ = saved_xp_;
    primed_ = saved_primed_;
}

GmpMaterial::GmpMaterial(double k0, double fy, double b, double r0, double cr1,
                         double cr2)
    : k0_(k0), fy_(fy), b_(b), r0_(r0), cr1_(cr1), cr2_(cr2),
      eps_y_(fy / k0) {
    if (!std::isfinite(k0) || !std::isfinite(fy) || !std::isfinite(b) ||
        !std::isfinite(r0) || !std::isfinite(cr1) || !std::isfinite(cr2) ||
        k0 <= 0.0 || fy <= 0.0 || b < 0.0 || b >= 1.0 || r0 <= 0.0 ||
        cr1 < 0.0 || cr1 >= 1.0 || cr2 <= 0.0) {
        raise(ErrorCode::invalid_argument,
              "smooth material needs k0, fy, r0, cr2 > 0, 0 <= b < 1, "
              "0 <= cr1 < 1");
    }
}

/// Opens a new branch from the current point toward the +/- hardening
/// asymptote sigma = b*k0*eps +/- (1 - b)*fy. The branch's transition
/// sharpness degrades with the normalised distance between the largest
/// excursion previously reached in the loading direction and the new
/// asymptote intersection; reversals inside the elastic range leave
/// that distance near zero and keep the corner crisp.
void GmpMaterial::start_branch(int dir) {
    if (dir > 0) {
        if (s_.eps < s_.eps_min) s_.eps_min = s_.eps;
    } else {
        if (s_.eps > s_.eps_max) s_.eps_max = s_.eps;
    }
    s_.eps_r = s_.eps;
    s_.sig_r = s_.sig;
    s_.dir = dir;
    const double sgn = static_cast<double>(dir);
    s_.eps_0 = (sgn * (1.0 - b_) * fy_ - s_.sig_r + k0_ * s_.eps_r) /
               (k0_ * (1.0 - b_));
    s_.sig_0 = s_.sig_r + k0_ * (s_.eps_0 - s_.eps_r);
    const double anchor = dir > 0 ? s_.eps_max : s_.eps_min;
    const double xi = std::abs((anchor - s_.eps_0) / eps_y_);
    s_.sharp = r0_ * (1.0 - cr1_ * xi / (cr2_ + xi));
}

double GmpMaterial::evaluate(double eps) {
    const double span = s_.eps_0 - s_.eps_r;
    // A reversal exactly on the asymptote leaves no transition span;
    // continue along the elastic line.
    if (span == 0.0) {
        s_.sig = s_.sig_r + k0_ * (eps - s_.eps_r);
    } else {
        const double e = (eps - s_.eps_r) / span;
        const double s = b_ * e + (1.0 - b_) * e /
                                      std::pow(1.0 + std::pow(std::abs(e),
                                                              s_.sharp),
                                               1.0 / s_.sharp);
        s_.sig = s_.sig_r + s * (s_.sig_0 - s_.sig_r);
    }
    s_.eps = eps;
    return s_.sig;
}

double GmpMaterial::init(double x0) {
    check_sample(x0);
    s_ = State{};
    s_.eps_max = eps_y_; // virgin memory sits at the yield excursion
    s_.eps_min = -eps_y_;
    primed_ = true;
    if (x0 == 0.0) return 0.0;
    start_branch(x0 > 0.0 ? 1 : -1);
    return evaluate(x0);
}

double GmpMaterial::step(double x) {
    if (!primed_) {
        raise(ErrorCode::protocol_misuse, "material stepped before init");
    }
    check_sample(x);
    const double deps = x - s_.eps;
    if (s_.dir == 0) {
        if (deps == 0.0) return s_.sig;
        start_branch(deps > 0.0 ? 1 : -1);
    } else if ((s_.dir > 0 && deps < 0.0) || (s_.dir < 0 && deps > 0.0)) {
        start_branch(s_.dir > 0 ? -1 : 1);
    }
    return evaluate(x);
}

void GmpMaterial::snapshot() {
    saved_ = s_;
    saved_primed_ = primed_;
    have_snapshot_ = true;
}

void GmpMaterial::restore() {
    if (!have_snapshot_) {
        raise(ErrorCode::protocol_misuse, "restore without snapshot");
    }
    s_ = saved_;
    primed_ = saved_primed_;
}

SignalSeries generate_protocol(const LoadingProtocol& protocol) {
    if (protocol.amplitudes.empty()) {
        raise(ErrorCode::invalid_argument,
              "protocol needs at least one amplitude");
    }
    if (protocol.points_per_branch < 2) {
        raise(ErrorCode::invalid_argument,
              "protocol needs points_per_branch >= 2");
    }
    double prev = 0.0;
    for (double a : protocol.amplitudes) {
        if (!std::isfinite(a) || a <= 0.0 || a < prev) {
            raise(ErrorCode::invalid_argument,
                  "protocol amplitudes must be positive and non-decreasing");
        }
        prev = a;
    }

    std::vector<double> waypoints;
    waypoints.push_back(0.0);
    for (double a : protocol.amplitudes) {
        waypoints.push_back(a);
        waypoints.push_back(-a);
    }
    waypoints.push_back(0.0);

    SignalSeries out;
    out.x.push_back(waypoints.front());
    const std::size_t steps = protocol.points_per_branch - 1;
    for (std::size_t b = 1; b < waypoints.size(); ++b) {
        const double from = waypoints[b - 1];
        const double to = waypoints[b];
        for (std::size_t k = 1; k <= steps; ++k) {
            const double f = static_cast<double>(k) /
                             static_cast<double>(steps);
            out.x.push_back(from + f * (to - from));
        }
    }
    out.t.resize(out.x.size());
    for (std::size_t k = 0; k < out.t.size(); ++k) {
        out.t[k] = static_cast<double>(k);
    }
    return out;
}

SignalSeries run_cyclic_pushover(ForceProvider& material,
                                 const SignalSeries& protocol) {
    protocol.validate();
    SignalSeries out;
    out.t = protocol.t;
    out.x = protocol.x;
    out.force.reserve(out.x.size());
    out.force.push_back(material.init(out.x[0]));
    for (std::size_t k = 1; k < out.x.size(); ++k) {
        out.force.push_back(material.step(out.x[k]));
    }
    return out;
}

} // namespace pisindy
