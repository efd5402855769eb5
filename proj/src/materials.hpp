#pragma once

#include <cstddef>
#include <vector>

#include "provider.hpp"
#include "series.hpp"

namespace pisindy {

/// Bilinear kinematic-hardening element (stiffness k1 up to the yield
/// displacement dy, k2 beyond), advanced by radial return mapping.
/// The same law is exactly the two-term superposition
/// k2*x + (k1 - k2)*E_dy[x], which the tests exploit as an oracle.
class BilinearMaterial final : public ForceProvider {
public:
    BilinearMaterial(double k1, double k2, double dy);

    double init(double x0) override;
    double step(double x) override;
    void snapshot() override;
    void restore() override;

    double k1() const { return k1_; }
    double k2() const { return k2_; }
    double dy() const { return dy_; }

private:
    double update(double x);

    double k1_;
    double k2_;
    double dy_;
    double hardening_; // kinematic modulus k1*k2/(k1 - k2)
    double fy_;        // yield force k1*dy

    double xp_ = 0.0; // plastic offset
    bool primed_ = false;
    double saved_xp_ = 0.0;
    bool saved_primed_ = false;
    bool have_snapshot_ = false;
};

/// Giuffre-Menegotto-Pinto steel element without isotropic hardening:
/// smooth transition of sharpness R between the elastic line and the
/// hardening asymptote. R degrades with the excursion between the
/// largest displacement previously reached in the loading direction and
/// the branch asymptote, so elastic cycles keep crisp corners while
/// post-yield loops soften and stabilise.
class GmpMaterial final : public ForceProvider {
public:
    GmpMaterial(double k0, double fy, double b, double r0, double cr1,
                double cr2);

    double init(double x0) override;
    double step(double x) override;
    void snapshot() override;
    void restore() override;

    double k0() const { return k0_; }
    double fy() const { return fy_; }
    double b() const { return b_; }

private:
    struct State {
        double eps = 0.0;
        double sig = 0.0;
        double eps_r = 0.0; // last reversal point
        double sig_r = 0.0;
        double eps_0 = 0.0; // asymptote intersection of the branch
        double sig_0 = 0.0;
        double eps_max = 0.0; // largest excursion reached upward
        double eps_min = 0.0; // largest excursion reached downward
        double sharp = 0.0;   // transition sharpness of the branch
        int dir = 0;          // 0 virgin, +1 loading up, -1 loading down
    };

    void start_branch(int dir);
    double evaluate(double eps);

    double k0_;
    double fy_;
    double b_;
    double r0_;
    double cr1_;
    double cr2_;
    double eps_y_; // fy/k0

    State s_;
    bool primed_ = false;
    State saved_;
    bool saved_primed_ = false;
    bool have_snapshot_ = false;
};

/// Increasing cyclic displacement protocol: one full +a/-a excursion
/// per amplitude, starting and ending at zero.
struct LoadingProtocol {
    std::vector<double> amplitudes; // mm, positive, non-decreasing
    std::size_t points_per_branch = 200;
};

/// Piecewise-linear sweep through the protocol waypoints
/// 0, +a1, -a1, ..., +aN, -aN, 0, each branch sampled with
/// points_per_branch points sharing its endpoints. Timestamps are the
/// sample index in seconds (the response is rate independent).
SignalSeries generate_protocol(const LoadingProtocol& protocol);

/// Displacement-controlled sweep of the protocol displacements through
/// a material, pairing each sample with the measured restoring force.
SignalSeries run_cyclic_pushover(ForceProvider& material,
                                 const SignalSeries& protocol);

} // namespace pisindy
