#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "frame.hpp"
#include "materials.hpp"
#include "pi_sindy.hpp"

namespace pisindy {

/// Flat key/value run configuration. Every key is registered with a
/// type and a default; unknown keys and unparsable values are
/// rejected, and dump() emits the fully resolved set so any output can
/// be reproduced from the config written next to it.
///
/// File syntax: one `key = value` per line, `#` starts a comment,
/// blank lines ignored.
class RunConfig {
public:
    RunConfig();

    void apply_file(const std::string& path);
    /// Parses one `key=value` override (the CLI --set form).
    void apply_override(const std::string& text);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;

    /// All keys in sorted order, canonically formatted.
    std::string dump() const;
    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

std::unique_ptr<ForceProvider> material_from_config(const RunConfig& cfg);
LoadingProtocol protocol_from_config(const RunConfig& cfg);
TrainOptions train_options_from_config(const RunConfig& cfg);
FrameModel frame_from_config(const RunConfig& cfg);
GroundMotion motion_from_config(const RunConfig& cfg);
SimOptions sim_options_from_config(const RunConfig& cfg);

} // namespace pisindy
