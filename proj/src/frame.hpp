#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "provider.hpp"

namespace pisindy {

/// Standard gravity, mm/s^2.
constexpr double gravity_mm_s2 = 9806.65;

/// Single-storey braced frame reduced to one lateral degree of
/// freedom. Units: mass in t, stiffness kN/mm, lengths mm, time s;
/// with those, force[kN] = mass[t] * accel[mm/s^2] * 1e-3.
struct FrameModel {
    double mass = 0.0;            // storey mass (t)
    double k_frame = 0.0;         // elastic frame lateral stiffness (kN/mm)
    double zeta = 0.0;            // viscous damping ratio at T1
    double height = 0.0;          // storey height (mm)
    double theta = 0.0;           // brace inclination from horizontal (rad)
    double k_brace_nominal = 0.0; // brace initial stiffness (kN/mm)

    void validate() const;
};

/// T = 2*pi*sqrt(M / (K_e + k_brace*cos^2(theta))) with the mass
/// converted to the consistent kN*s^2/mm unit.
double natural_period(const FrameModel& frame, double k_brace);

/// Frame with the mass back-calculated so the natural period at the
/// nominal brace stiffness equals period_target. theta = atan(h/bay).
FrameModel calibrated_frame(double k_frame, double zeta, double height,
                            double bay, double k_brace_nominal,
                            double period_target);

struct GroundMotion {
    double dt = 0.0;            // sampling interval (s)
    std::vector<double> accel;  // ground acceleration (mm/s^2)

    double duration() const;
    void validate() const;
};

enum class MotionFormat { csv2col, peer_at2 };
enum class AccelUnits { g, mm_s2, m_s2, from_header };

GroundMotion load_ground_motion(const std::string& path, MotionFormat format,
                                AccelUnits units, double scale);

/// Deterministic test record: a sum of enveloped sinusoids spanning
/// 0.4-8 Hz, normalised to the requested peak acceleration.
GroundMotion synthetic_motion(std::uint32_t seed, double duration, double dt,
                              double pga_g);

/// Piecewise-linear interpolation of the record, zero outside it.
double ground_accel_at(const GroundMotion& motion, double t);

struct ResponseHistory {
    std::vector<double> t;       // s
    std::vector<double> u;       // storey displacement (mm)
    std::vector<double> v;       // mm/s
    std::vector<double> a;       // mm/s^2 (relative)
    std::vector<double> x_brace; // brace deformation u*cos(theta) (mm)
    std::vector<double> r_brace; // brace force (kN)
    std::vector<double> drift;   // u/h

    std::size_t size() const { return t.size(); }
    double peak_drift() const;
};

void save_history_csv(const ResponseHistory& history, const std::string& path);
ResponseHistory load_history_csv(const std::string& path);

enum class Scheme { explicit_newmark, average_acceleration };

struct SimOptions {
    Scheme scheme = Scheme::explicit_newmark;
    /// Integration substep (s); 0 picks motion.dt / 10.
    double dt_sub = 0.0;
    double newton_tol = 1e-8; // residual force (kN)
    std::size_t newton_max_iter = 50;
    double u0 = 0.0; // initial displacement (mm)
    double v0 = 0.0; // initial velocity (mm/s)
};

/// Step-by-step solution of
///   M*u'' + C*u' + K_e*u + cos(theta)*R(u*cos(theta)) = -M*ag(t).
/// The explicit scheme (Newmark gamma=1/2, beta=0) performs exactly
/// one displacement/force exchange with the brace per substep; the
/// average-acceleration scheme iterates with a constant effective
/// stiffness, using the provider's snapshot/restore for trial states.
/// On a thrown error the history holds all committed samples, so a
/// partial run can still be flushed.
class SimulationEngine {
public:
    SimulationEngine(FrameModel frame, GroundMotion motion, SimOptions opt);

    void run(ForceProvider& brace);
    const ResponseHistory& history() const { return history_; }
    const FrameModel& frame() const { return frame_; }

private:
    void run_explicit(ForceProvider& brace);
    void run_implicit(ForceProvider& brace);
    void record(double t, double u, double v, double a, double r);

    FrameModel frame_;
    GroundMotion motion_;
    SimOptions opt_;
    double dt_ = 0.0;       // resolved substep
    std::size_t nsteps_ = 0;
    double mass_c_ = 0.0;   // mass in kN*s^2/mm
    double damping_ = 0.0;  // C = 2*zeta*omega1*M (kN*s/mm)
    double cos_theta_ = 0.0;
    ResponseHistory history_;
};

struct CompareReport {
    double nrmse_drift = 0.0;
    double nrmse_force = 0.0;
    double peak_drift_ref = 0.0;
    double peak_drift_test = 0.0;
};

CompareReport compare_runs(const ResponseHistory& ref,
                           const ResponseHistory& test);

} // namespace pisindy
