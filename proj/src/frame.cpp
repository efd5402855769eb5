#include "frame.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "errors.hpp"
#include "pi_sindy.hpp"
#include "rng.hpp"

namespace pisindy {

void FrameModel::validate() const {
    if (!std::isfinite(mass) || !std::isfinite(k_frame) ||
        !std::isfinite(zeta) || !std::isfinite(height) ||
        !std::isfinite(theta) || !std::isfinite(k_brace_nominal)) {
        raise(ErrorCode::invalid_argument, "frame parameters must be finite");
    }
    if (mass <= 0.0 || k_frame <= 0.0 || height <= 0.0) {
        raise(ErrorCode::invalid_argument,
              "frame needs mass, stiffness and height > 0");
    }
    if (zeta < 0.0 || zeta >= 1.0) {
        raise(ErrorCode::invalid_argument, "damping ratio must be in [0, 1)");
    }
    if (theta <= 0.0 || theta >= M_PI / 2.0) {
        raise(ErrorCode::invalid_argument,
              "brace inclination must be in (0, pi/2)");
    }
    if (k_brace_nominal < 0.0) {
        raise(ErrorCode::invalid_argument,
              "nominal brace stiffness must be >= 0");
    }
}

double natural_period(const FrameModel& frame, double k_brace) {
    frame.validate();
    if (!std::isfinite(k_brace) || k_brace < 0.0) {
        raise(ErrorCode::invalid_argument, "brace stiffness must be >= 0");
    }
    const double c = std::cos(frame.theta);
    const double k_total = frame.k_frame + k_brace * c * c;
    const double mass_c = frame.mass * 1e-3; // kN*s^2/mm
    return 2.0 * M_PI * std::sqrt(mass_c / k_total);
}

FrameModel calibrated_frame(double k_frame, double zeta, double height,
                            double bay, double k_brace_nominal,
                            double period_target) {
    if (!std::isfinite(bay) || bay <= 0.0 || !std::isfinite(period_target) ||
        period_target <= 0.0) {
        raise(ErrorCode::invalid_argument,
              "frame calibration needs bay and period_target > 0");
    }
    FrameModel frame;
    frame.k_frame = k_frame;
    frame.zeta = zeta;
    frame.height = height;
    frame.theta = std::atan2(height, bay);
    frame.k_brace_nominal = k_brace_nominal;
    const double c = std::cos(frame.theta);
    const double k_total = k_frame + k_brace_nominal * c * c;
    const double omega = 2.0 * M_PI / period_target;
    frame.mass = k_total / (omega * omega) * 1e3; // t
    frame.validate();
    return frame;
}

double GroundMotion::duration() const {
    return accel.empty() ? 0.0
                         : dt * static_cast<double>(accel.size() - 1);
}

void GroundMotion::validate() const {
    if (!std::isfinite(dt) || dt <= 0.0) {
        raise(ErrorCode::invalid_argument, "ground motion needs dt > 0");
    }
    if (accel.empty()) {
        raise(ErrorCode::empty_series, "ground motion has no samples");
    }
    for (double a : accel) {
        if (!std::isfinite(a)) {
            raise(ErrorCode::invalid_argument,
                  "ground motion samples must be finite");
        }
    }
}

namespace {

double unit_factor(AccelUnits units, const std::string& context) {
    switch (units) {
    case AccelUnits::g: return gravity_mm_s2;
    case AccelUnits::mm_s2: return 1.0;
    case AccelUnits::m_s2: return 1000.0;
    case AccelUnits::from_header:
        raise(ErrorCode::unknown_units,
              context + ": no unit declared in header and none given");
    }
    raise(ErrorCode::internal_error, "unhandled unit");
}

GroundMotion load_csv2col(const std::string& path, AccelUnits units) {
    const CsvTable table = read_csv(path);
    if (table.headers.size() != 2 || table.headers[0] != "t") {
        raise(ErrorCode::malformed_file,
              path + ": expected a two-column t,ag file");
    }
    const std::string& ag = table.headers[1];
    double factor = 0.0;
    if (ag == "ag") {
        factor = unit_factor(units, path);
    } else if (ag == "ag[g]") {
        factor = gravity_mm_s2;
    } else if (ag == "ag[mm/s2]") {
        factor = 1.0;
    } else if (ag == "ag[m/s2]") {
        factor = 1000.0;
    } else if (ag.rfind("ag[", 0) == 0) {
        raise(ErrorCode::unknown_units, path + ": unknown unit in " + ag);
    } else {
        raise(ErrorCode::malformed_file,
              path + ": second column must be ag, got " + ag);
    }

    const std::vector<double>& t = table.columns[0];
    GroundMotion motion;
    motion.accel = table.columns[1];
    for (double& a : motion.accel) a *= factor;
    if (t.size() < 2) {
        raise(ErrorCode::malformed_file,
              path + ": need at least two samples to infer dt");
    }
    motion.dt = t[1] - t[0];
    if (motion.dt <= 0.0) {
        raise(ErrorCode::malformed_file, path + ": time must increase");
    }
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double step = t[k] - t[k - 1];
        if (std::abs(step - motion.dt) > 1e-6 * std::max(motion.dt, 1.0)) {
            raise(ErrorCode::malformed_file,
                  path + ": non-uniform sampling at row " + std::to_string(k));
        }
    }
    return motion;
}

GroundMotion load_peer_at2(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::io_error, "cannot open " + path);
    }
    std::string line;
    long npts = -1;
    double dt = 0.0;
    // Header lines precede one carrying "NPTS= <n>, DT= <dt> SEC".
    while (std::getline(in, line)) {
        const std::size_t at_npts = line.find("NPTS");
        const std::size_t at_dt = line.find("DT");
        if (at_npts == std::string::npos || at_dt == std::string::npos) {
            continue;
        }
        auto number_after = [&](std::size_t from) -> std::string {
            const std::size_t eq = line.find('=', from);
            if (eq == std::string::npos) return {};
            std::size_t s = eq + 1;
            while (s < line.size() && line[s] == ' ') ++s;
            std::size_t e = s;
            while (e < line.size() &&
                   (std::isdigit(static_cast<unsigned char>(line[e])) ||
                    line[e] == '.' || line[e] == '+' || line[e] == '-' ||
                    line[e] == 'e' || line[e] == 'E')) {
                ++e;
            }
            return line.substr(s, e - s);
        };
        const std::string npts_text = number_after(at_npts);
        const std::string dt_text = number_after(at_dt);
        if (npts_text.empty() || dt_text.empty()) {
            raise(ErrorCode::malformed_file,
                  path + ": cannot parse NPTS/DT header");
        }
        npts = std::lround(parse_double(npts_text));
        // Values like ".0100" need a leading-zero tolerant parse.
        dt = parse_double(dt_text[0] == '.' ? "0" + dt_text : dt_text);
        break;
    }
    if (npts <= 0 || dt <= 0.0) {
        raise(ErrorCode::malformed_file, path + ": missing NPTS/DT header");
    }
    GroundMotion motion;
    motion.dt = dt;
    double value = 0.0;
    while (in >> value) {
        motion.accel.push_back(value * gravity_mm_s2); // AT2 records are in g
    }
    if (!in.eof()) {
        raise(ErrorCode::malformed_file, path + ": non-numeric data value");
    }
    if (static_cast<long>(motion.accel.size()) != npts) {
        raise(ErrorCode::malformed_file,
              path + ": header declares " + std::to_string(npts) +
                  " points but file has " +
                  std::to_string(motion.accel.size()));
    }
    return motion;
}

} // namespace

GroundMotion load_ground_motion(const std::string& path, MotionFormat format,
                                AccelUnits units, double scale) {
    if (!std::isfinite(scale)) {
        raise(ErrorCode::invalid_argument, "motion scale must be finite");
    }
    GroundMotion motion = format == MotionFormat::csv2col
                              ? load_csv2col(path, units)
                              : load_peer_at2(path);
    for (double& a : motion.accel) a *= scale;
    motion.validate();
    return motion;
}

GroundMotion synthetic_motion(std::uint32_t seed, double duration, double dt,
                              double pga_g) {
    if (!std::isfinite(duration) || duration <= 0.0 || !std::isfinite(dt) ||
        dt <= 0.0 || !std::isfinite(pga_g) || pga_g <= 0.0) {
        raise(ErrorCode::invalid_argument,
              "synthetic motion needs duration, dt, pga > 0");
    }
    Rng rng(seed);
    constexpr std::size_t n_components = 12;
    constexpr double f_lo = 0.4; // Hz
    constexpr double f_hi = 8.0;
    std::vector<double> freq(n_components);
    std::vector<double> phase(n_components);
    for (std::size_t j = 0; j < n_components; ++j) {
        const double pos = (static_cast<double>(j) + rng.uniform()) /
                           static_cast<double>(n_components);
        freq[j] = f_lo * std::pow(f_hi / f_lo, pos);
        phase[j] = rng.uniform(0.0, 2.0 * M_PI);
    }

    const std::size_t n =
        static_cast<std::size_t>(std::lround(duration / dt)) + 1;
    const double t_rise = 0.15 * duration;
    const double t_flat = 0.6 * duration;
    GroundMotion motion;
    motion.dt = dt;
    motion.accel.resize(n);
    double peak = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        double envelope = 1.0;
        if (t < t_rise) {
            envelope = (t / t_rise) * (t / t_rise);
        } else if (t > t_flat) {
            envelope = std::exp(-3.0 * (t - t_flat) / (duration - t_flat));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n_components; ++j) {
            sum += std::sin(2.0 * M_PI * freq[j] * t + phase[j]);
        }
        motion.accel[k] = envelope * sum;
        peak = std::max(peak, std::abs(motion.accel[k]));
    }
    const double target = pga_g * gravity_mm_s2;
    for (double& a : motion.accel) a *= target / peak;
    return motion;
}

double ground_accel_at(const GroundMotion& motion, double t) {
    if (t <= 0.0) return motion.accel.empty() ? 0.0 : motion.accel.front();
    const double pos = t / motion.dt;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= motion.accel.size()) {
        return t <= motion.duration() ? motion.accel.back() : 0.0;
    }
    const double f = pos - static_cast<double>(k);
    return motion.accel[k] + f * (motion.accel[k + 1] - motion.accel[k]);
}

double ResponseHistory::peak_drift() const {
    double peak = 0.0;
    for (double d : drift) peak = std::max(peak, std::abs(d));
    return peak;
}

void save_history_csv(const ResponseHistory& history, const std::string& path) {
    CsvTable table;
    table.headers = {"t", "u", "v", "a", "x_brace", "R_brace", "drift"};
    table.columns = {history.t,       history.u,       history.v,
                     history.a,       history.x_brace, history.r_brace,
                     history.drift};
    write_csv(path, table);
}

ResponseHistory load_history_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const char* names[7] = {"t", "u", "v", "a", "x_brace", "R_brace", "drift"};
    ResponseHistory history;
    std::vector<double>* series[7] = {
        &history.t, &history.u,       &history.v,      &history.a,
        &history.x_brace, &history.r_brace, &history.drift};
    for (std::size_t c = 0; c < 7; ++c) {
        const std::vector<double>* col = table.find(names[c]);
        if (!col) {
            raise(ErrorCode::malformed_file,
                  path + ": missing column " + names[c]);
        }
        *series[c] = *col;
    }
    return history;
}

SimulationEngine::SimulationEngine(FrameModel frame, GroundMotion motion,
                                   SimOptions opt)
    : frame_(frame), motion_(std::move(motion)), opt_(opt) {
    frame_.validate();
    motion_.validate();
    if (!std::isfinite(opt_.dt_sub) || opt_.dt_sub < 0.0) {
        raise(ErrorCode::invalid_argument, "dt_sub must be >= 0");
    }
    if (!std::isfinite(opt_.newton_tol) || opt_.newton_tol <= 0.0 ||
        opt_.newton_max_iter == 0) {
        raise(ErrorCode::invalid_argument,
              "newton_tol must be > 0 and newton_max_iter >= 1");
    }
    if (!std::isfinite(opt_.u0) || !std::isfinite(opt_.v0)) {
        raise(ErrorCode::invalid_argument,
              "initial conditions must be finite");
    }

    const double requested =
        opt_.dt_sub > 0.0 ? opt_.dt_sub : motion_.dt / 10.0;
    const auto nsub = static_cast<std::size_t>(
        std::max(1.0, std::ceil(motion_.dt / requested - 1e-12)));
    dt_ = motion_.dt / static_cast<double>(nsub);
    nsteps_ = nsub * (motion_.accel.size() - 1);

    mass_c_ = frame_.mass * 1e-3;
    const double omega1 =
        2.0 * M_PI / natural_period(frame_, frame_.k_brace_nominal);
    damping_ = 2.0 * frame_.zeta * omega1 * mass_c_;
    cos_theta_ = std::cos(frame_.theta);
}

void SimulationEngine::record(double t, double u, double v, double a,
                              double r) {
    history_.t.push_back(t);
    history_.u.push_back(u);
    history_.v.push_back(v);
    history_.a.push_back(a);
    history_.x_brace.push_back(u * cos_theta_);
    history_.r_brace.push_back(r);
    history_.drift.push_back(u / frame_.height);
}

void SimulationEngine::run(ForceProvider& brace) {
    history_ = ResponseHistory{};
    const std::size_t expected = nsteps_ + 1;
    history_.t.reserve(expected);
    history_.u.reserve(expected);
    history_.v.reserve(expected);
    history_.a.reserve(expected);
    history_.x_brace.reserve(expected);
    history_.r_brace.reserve(expected);
    history_.drift.reserve(expected);
    if (opt_.scheme == Scheme::explicit_newmark) {
        run_explicit(brace);
    } else {
        run_implicit(brace);
    }
}

void SimulationEngine::run_explicit(ForceProvider& brace) {
    const double period = natural_period(frame_, frame_.k_brace_nominal);
    if (dt_ > period / 20.0) {
        std::ostringstream msg;
        msg << "explicit substep " << dt_ << " s exceeds T/20 = "
            << period / 20.0 << " s";
        raise(ErrorCode::stability_violation, msg.str());
    }

    double u = opt_.u0;
    double v = opt_.v0;
    double r = brace.init(u * cos_theta_);
    double a = (-mass_c_ * ground_accel_at(motion_, 0.0) - frame_.k_frame * u -
                cos_theta_ * r - damping_ * v) /
               mass_c_;
    record(0.0, u, v, a, r);

    const double half_dt = 0.5 * dt_;
    const double denom = mass_c_ + half_dt * damping_;
    for (std::size_t i = 1; i <= nsteps_; ++i) {
        const double t = static_cast<double>(i) * dt_;
        const double u_next = u + dt_ * v + half_dt * dt_ * a;
        // The single displacement/force exchange of this step.
        const double r_next = brace.step(u_next * cos_theta_);
        const double p = -mass_c_ * ground_accel_at(motion_, t);
        const double a_next =
            (p - frame_.k_frame * u_next - cos_theta_ * r_next -
             damping_ * (v + half_dt * a)) /
            denom;
        const double v_next = v + half_dt * (a + a_next);
        u = u_next;
        v = v_next;
        a = a_next;
        r = r_next;
        record(t, u, v, a, r);
    }
}

void SimulationEngine::run_implicit(ForceProvider& brace) {
    constexpr double beta = 0.25;
    constexpr double gamma = 0.5;

    double u = opt_.u0;
    double v = opt_.v0;
    double r = brace.init(u * cos_theta_);
    double a = (-mass_c_ * ground_accel_at(motion_, 0.0) - frame_.k_frame * u -
                cos_theta_ * r - damping_ * v) /
               mass_c_;
    record(0.0, u, v, a, r);

    const double inv_bdt2 = 1.0 / (beta * dt_ * dt_);
    const double inv_bdt = 1.0 / (beta * dt_);
    const double k_eff = mass_c_ * inv_bdt2 + gamma * damping_ * inv_bdt +
                         frame_.k_frame +
                         cos_theta_ * cos_theta_ * frame_.k_brace_nominal;

    for (std::size_t i = 1; i <= nsteps_; ++i) {
        const double t = static_cast<double>(i) * dt_;
        const double p = -mass_c_ * ground_accel_at(motion_, t);
        brace.snapshot();
        double u_trial = u;
        double a_trial = 0.0;
        double v_trial = 0.0;
        bool converged = false;
        for (std::size_t it = 0; it < opt_.newton_max_iter; ++it) {
            brace.restore();
            const double r_trial = brace.step(u_trial * cos_theta_);
            a_trial = (u_trial - u) * inv_bdt2 - v * inv_bdt -
                      (1.0 / (2.0 * beta) - 1.0) * a;
            v_trial = v + dt_ * ((1.0 - gamma) * a + gamma * a_trial);
            const double residual = p - mass_c_ * a_trial -
                                    damping_ * v_trial -
                                    frame_.k_frame * u_trial -
                                    cos_theta_ * r_trial;
            if (std::abs(residual) <= opt_.newton_tol) {
                r = r_trial;
                converged = true;
                break;
            }
            u_trial += residual / k_eff;
        }
        if (!converged) {
            std::ostringstream msg;
            msg << "equilibrium iteration failed at t = " << t << " s after "
                << opt_.newton_max_iter << " iterations";
            raise(ErrorCode::divergence, msg.str());
        }
        u = u_trial;
        v = v_trial;
        a = a_trial;
        record(t, u, v, a, r);
    }
}

CompareReport compare_runs(const ResponseHistory& ref,
                           const ResponseHistory& test) {
    if (ref.size() != test.size()) {
        raise(ErrorCode::length_mismatch,
              "reference has " + std::to_string(ref.size()) +
                  " samples but test has " + std::to_string(test.size()));
    }
    CompareReport report;
    report.nrmse_drift = nrmse(ref.drift, test.drift);
    report.nrmse_force = nrmse(ref.r_brace, test.r_brace);
    report.peak_drift_ref = ref.peak_drift();
    report.peak_drift_test = test.peak_drift();
    return report;
}

} // namespace pisindy
