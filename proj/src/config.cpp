#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "errors.hpp"

namespace pisindy {

namespace {

enum class Kind { real, integer, boolean, text, choice, real_list };

struct KeySpec {
    Kind kind;
    const char* fallback;
    std::vector<const char*> choices;
};

const std::map<std::string, KeySpec>& registry() {
    static const std::map<std::string, KeySpec> keys = {
        {"material.kind", {Kind::choice, "gmp", {"bilinear", "gmp"}}},
        {"material.k1", {Kind::real, "180.0", {}}},
        {"material.dy", {Kind::real, "4.0", {}}},
        {"material.b", {Kind::real, "0.02", {}}},
        {"material.R0", {Kind::real, "20.0", {}}},
        {"material.cR1", {Kind::real, "0.925", {}}},
        {"material.cR2", {Kind::real, "0.15", {}}},

        {"protocol.amplitudes",
         {Kind::real_list, "1,2,4,8,12,16,24,32,40,48", {}}},
        {"protocol.points_per_branch", {Kind::integer, "200", {}}},

        {"train.m", {Kind::integer, "50", {}}},
        {"train.lambda", {Kind::real, "0.1", {}}},
        {"train.tol", {Kind::real, "1e-08", {}}},
        {"train.max_sweeps", {Kind::integer, "100000", {}}},
        {"train.penalize_affine", {Kind::boolean, "false", {}}},
        {"train.standardize", {Kind::boolean, "false", {}}},

        {"frame.K_e", {Kind::real, "5.0", {}}},
        {"frame.zeta", {Kind::real, "0.02", {}}},
        {"frame.h", {Kind::real, "4000.0", {}}},
        {"frame.bay", {Kind::real, "6000.0", {}}},
        // 0 = calibrate the mass from frame.period_target.
        {"frame.mass", {Kind::real, "0.0", {}}},
        {"frame.period_target", {Kind::real, "0.492", {}}},
        // 0 = use material.k1.
        {"frame.k_brace_nominal", {Kind::real, "0.0", {}}},

        {"motion.kind",
         {Kind::choice, "synthetic", {"synthetic", "csv2col", "peer_at2"}}},
        {"motion.file", {Kind::text, "", {}}},
        {"motion.units", {Kind::choice, "g", {"g", "mm_s2", "m_s2"}}},
        {"motion.scale", {Kind::real, "1.0", {}}},
        {"motion.dt", {Kind::real, "0.01", {}}},
        {"motion.duration", {Kind::real, "20.0", {}}},
        {"motion.pga", {Kind::real, "0.35", {}}},
        {"motion.seed", {Kind::integer, "2026", {}}},

        {"sim.scheme", {Kind::choice, "explicit", {"explicit", "implicit"}}},
        // 0 = motion dt / 10.
        {"sim.dt_sub", {Kind::real, "0.0", {}}},
        {"sim.newton_tol", {Kind::real, "1e-08", {}}},
        {"sim.newton_max_iter", {Kind::integer, "50", {}}},
        {"sim.u0", {Kind::real, "0.0", {}}},
        {"sim.v0", {Kind::real, "0.0", {}}},

        {"couple.endpoint", {Kind::text, "127.0.0.1:45001", {}}},
        {"couple.timeout_s", {Kind::real, "30.0", {}}},
        {"couple.log", {Kind::text, "", {}}},
    };
    return keys;
}

const KeySpec& spec_for(const std::string& key) {
    const auto it = registry().find(key);
    if (it == registry().end()) {
        raise(ErrorCode::config_error, "unknown config key '" + key + "'");
    }
    return it->second;
}

std::string trim(const std::string& text) {
    const std::size_t b = text.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const std::size_t e = text.find_last_not_of(" \t\r");
    return text.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        return parse_double(value);
    } catch (const Error&) {
        raise(ErrorCode::config_error,
              key + ": '" + value + "' is not a number");
    }
}

long parse_integer(const std::string& key, const std::string& value) {
    const double d = parse_real(key, value);
    const double rounded = std::nearbyint(d);
    if (d != rounded) {
        raise(ErrorCode::config_error,
              key + ": '" + value + "' is not an integer");
    }
    return static_cast<long>(rounded);
}

std::vector<double> parse_list(const std::string& key,
                               const std::string& value) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        const std::size_t comma = value.find(',', start);
        const std::string item = trim(
            value.substr(start, comma == std::string::npos ? std::string::npos
                                                           : comma - start));
        if (!item.empty()) out.push_back(parse_real(key, item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Validates against the key's type and returns the canonical spelling.
std::string canonicalize(const std::string& key, const std::string& value) {
    const KeySpec& spec = spec_for(key);
    switch (spec.kind) {
    case Kind::real:
        return format_double(parse_real(key, value));
    case Kind::integer:
        return std::to_string(parse_integer(key, value));
    case Kind::boolean:
        if (value == "true" || value == "1") return "true";
        if (value == "false" || value == "0") return "false";
        raise(ErrorCode::config_error,
              key + ": '" + value + "' is not true/false");
    case Kind::text:
        return value;
    case Kind::choice:
        for (const char* choice : spec.choices) {
            if (value == choice) return value;
        }
        {
            std::string allowed;
            for (const char* choice : spec.choices) {
                if (!allowed.empty()) allowed += ", ";
                allowed += choice;
            }
            raise(ErrorCode::config_error, key + ": '" + value +
                                               "' is not one of " + allowed);
        }
    case Kind::real_list: {
        const std::vector<double> items = parse_list(key, value);
        if (items.empty()) {
            raise(ErrorCode::config_error, key + ": empty list");
        }
        std::string canon;
        for (double v : items) {
            if (!canon.empty()) canon += ",";
            canon += format_double(v);
        }
        return canon;
    }
    }
    raise(ErrorCode::internal_error, "unhandled config kind");
}

} // namespace

RunConfig::RunConfig() {
    for (const auto& [key, spec] : registry()) {
        values_[key] = spec.fallback;
    }
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorCode::io_error, "cannot open config " + path);
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            raise(ErrorCode::config_error,
                  path + " line " + std::to_string(line_no) +
                      ": expected key = value");
        }
        set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    }
}

void RunConfig::apply_override(const std::string& text) {
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
        raise(ErrorCode::config_error,
              "override '" + text + "' must be key=value");
    }
    set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
    values_[key] = canonicalize(key, value);
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        raise(ErrorCode::config_error, "unknown config key '" + key + "'");
    }
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    return parse_real(key, get(key));
}

long RunConfig::get_int(const std::string& key) const {
    return parse_integer(key, get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
    return get(key) == "true";
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
    return parse_list(key, get(key));
}

std::string RunConfig::dump() const {
    std::ostringstream out;
    for (const auto& [key, value] : values_) {
        out << key << " = " << value << '\n';
    }
    return out.str();
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorCode::io_error, "cannot write config " + path);
    }
    out << dump();
    if (!out) {
        raise(ErrorCode::io_error, "write failed for " + path);
    }
}

std::unique_ptr<ForceProvider> material_from_config(const RunConfig& cfg) {
    const double k1 = cfg.get_double("material.k1");
    const double dy = cfg.get_double("material.dy");
    const double b = cfg.get_double("material.b");
    if (cfg.get("material.kind") == "bilinear") {
        return std::make_unique<BilinearMaterial>(k1, b * k1, dy);
    }
    return std::make_unique<GmpMaterial>(k1, k1 * dy, b,
                                         cfg.get_double("material.R0"),
                                         cfg.get_double("material.cR1"),
                                         cfg.get_double("material.cR2"));
}

LoadingProtocol protocol_from_config(const RunConfig& cfg) {
    LoadingProtocol protocol;
    protocol.amplitudes = cfg.get_list("protocol.amplitudes");
    const long ppb = cfg.get_int("protocol.points_per_branch");
    if (ppb < 2) {
        raise(ErrorCode::config_error,
              "protocol.points_per_branch must be >= 2");
    }
    protocol.points_per_branch = static_cast<std::size_t>(ppb);
    return protocol;
}

TrainOptions train_options_from_config(const RunConfig& cfg) {
    TrainOptions opt;
    const long m = cfg.get_int("train.m");
    if (m < 1) {
        raise(ErrorCode::config_error, "train.m must be >= 1");
    }
    opt.m = static_cast<std::size_t>(m);
    opt.lambda = cfg.get_double("train.lambda");
    opt.tol = cfg.get_double("train.tol");
    const long sweeps = cfg.get_int("train.max_sweeps");
    if (sweeps < 1) {
        raise(ErrorCode::config_error, "train.max_sweeps must be >= 1");
    }
    opt.max_sweeps = static_cast<std::size_t>(sweeps);
    opt.penalize_affine = cfg.get_bool("train.penalize_affine");
    opt.standardize = cfg.get_bool("train.standardize");
    return opt;
}

FrameModel frame_from_config(const RunConfig& cfg) {
    double k_nominal = cfg.get_double("frame.k_brace_nominal");
    if (k_nominal == 0.0) k_nominal = cfg.get_double("material.k1");
    const double mass = cfg.get_double("frame.mass");
    if (mass == 0.0) {
        return calibrated_frame(
            cfg.get_double("frame.K_e"), cfg.get_double("frame.zeta"),
            cfg.get_double("frame.h"), cfg.get_double("frame.bay"), k_nominal,
            cfg.get_double("frame.period_target"));
    }
    FrameModel frame;
    frame.mass = mass;
    frame.k_frame = cfg.get_double("frame.K_e");
    frame.zeta = cfg.get_double("frame.zeta");
    frame.height = cfg.get_double("frame.h");
    frame.theta = std::atan2(frame.height, cfg.get_double("frame.bay"));
    frame.k_brace_nominal = k_nominal;
    frame.validate();
    return frame;
}

GroundMotion motion_from_config(const RunConfig& cfg) {
    const std::string& kind = cfg.get("motion.kind");
    const double scale = cfg.get_double("motion.scale");
    if (kind == "synthetic") {
        GroundMotion motion = synthetic_motion(
            static_cast<std::uint32_t>(cfg.get_int("motion.seed")),
            cfg.get_double("motion.duration"), cfg.get_double("motion.dt"),
            cfg.get_double("motion.pga"));
        for (double& a : motion.accel) a *= scale;
        return motion;
    }
    const std::string& file = cfg.get("motion.file");
    if (file.empty()) {
        raise(ErrorCode::config_error,
              "motion.kind = " + kind + " needs motion.file");
    }
    const MotionFormat format = kind == "csv2col" ? MotionFormat::csv2col
                                                  : MotionFormat::peer_at2;
    const std::string& units = cfg.get("motion.units");
    const AccelUnits accel_units = units == "g"      ? AccelUnits::g
                                   : units == "mm_s2" ? AccelUnits::mm_s2
                                                      : AccelUnits::m_s2;
    return load_ground_motion(file, format, accel_units, scale);
}

SimOptions sim_options_from_config(const RunConfig& cfg) {
    SimOptions opt;
    opt.scheme = cfg.get("sim.scheme") == "implicit"
                     ? Scheme::average_acceleration
                     : Scheme::explicit_newmark;
    opt.dt_sub = cfg.get_double("sim.dt_sub");
    opt.newton_tol = cfg.get_double("sim.newton_tol");
    const long iters = cfg.get_int("sim.newton_max_iter");
    if (iters < 1) {
        raise(ErrorCode::config_error, "sim.newton_max_iter must be >= 1");
    }
    opt.newton_max_iter = static_cast<std::size_t>(iters);
    opt.u0 = cfg.get_double("sim.u0");
    opt.v0 = cfg.get_double("sim.v0");
    return opt;
}

} // namespace pisindy
