// Command-line front end. Talks to the library exclusively through the
// C API, the same surface an external coupling client would use.
//
// Exit codes: 0 success, 1 usage or configuration problem, 2 numerical
// failure, 3 coupling or transport failure.

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pisindy/pisindy.h"

namespace {

struct ExitWith {
    int code;
};

template <auto F>
struct FnDeleter {
    template <typename T>
    void operator()(T* p) const {
        F(p);
    }
};

using ConfigPtr = std::unique_ptr<psy_config, FnDeleter<psy_config_free>>;
using SeriesPtr = std::unique_ptr<psy_series, FnDeleter<psy_series_free>>;
using ModelPtr = std::unique_ptr<psy_model, FnDeleter<psy_model_free>>;
using ProviderPtr = std::unique_ptr<psy_provider, FnDeleter<psy_provider_free>>;
using MotionPtr = std::unique_ptr<psy_motion, FnDeleter<psy_motion_free>>;
using FramePtr = std::unique_ptr<psy_frame, FnDeleter<psy_frame_free>>;
using HistoryPtr = std::unique_ptr<psy_history, FnDeleter<psy_history_free>>;
using ServerPtr = std::unique_ptr<psy_server, FnDeleter<psy_server_free>>;

int exit_code_for(psy_status st) {
    switch (st) {
    case PSY_OK:
        return 0;
    case PSY_ERR_INVALID_ARGUMENT:
    case PSY_ERR_MALFORMED_FILE:
    case PSY_ERR_SCHEMA_VERSION_MISMATCH:
    case PSY_ERR_UNKNOWN_UNITS:
    case PSY_ERR_CONFIG:
    case PSY_ERR_IO:
        return 1;
    case PSY_ERR_PROTOCOL_MISUSE:
    case PSY_ERR_BAD_MAGIC:
    case PSY_ERR_UNSUPPORTED_VERSION:
    case PSY_ERR_TRUNCATED_FRAME:
    case PSY_ERR_MALFORMED_FRAME:
    case PSY_ERR_PROVIDER_FAULT:
        return 3;
    default:
        return 2;
    }
}

void check(psy_status st) {
    if (st == PSY_OK) return;
    std::cerr << "error: " << psy_status_name(st) << ": " << psy_last_error()
              << "\n";
    throw ExitWith{exit_code_for(st)};
}

[[noreturn]] void usage_error(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    throw ExitWith{1};
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f%%", fraction * 100.0);
    return buf;
}

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config_file,
                    "configuration file with `key = value` lines");
    sub->add_option("--set", opts.overrides,
                    "override a configuration key (key=value, repeatable)");
}

ConfigPtr build_config(const CommonOpts& opts) {
    psy_config* raw = nullptr;
    check(psy_config_create(&raw));
    ConfigPtr cfg(raw);
    if (!opts.config_file.empty())
        check(psy_config_load_file(cfg.get(), opts.config_file.c_str()));
    for (const std::string& assignment : opts.overrides)
        check(psy_config_override(cfg.get(), assignment.c_str()));
    return cfg;
}

void save_sidecar(const ConfigPtr& cfg, const std::string& out_path) {
    check(psy_config_save(cfg.get(), (out_path + ".config").c_str()));
}

double config_double(const ConfigPtr& cfg, const char* key) {
    const char* text = nullptr;
    check(psy_config_get(cfg.get(), key, &text));
    return std::strtod(text, nullptr);
}

std::string config_string(const ConfigPtr& cfg, const char* key) {
    const char* text = nullptr;
    check(psy_config_get(cfg.get(), key, &text));
    return text;
}

bool split_endpoint(const std::string& text, std::string& host,
                    std::uint16_t& port, bool allow_zero) {
    const std::size_t colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        return false;
    long value = 0;
    try {
        std::size_t used = 0;
        value = std::stol(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) return false;
    } catch (const std::exception&) {
        return false;
    }
    if (value < (allow_zero ? 0 : 1) || value > 65535) return false;
    host = text.substr(0, colon);
    port = static_cast<std::uint16_t>(value);
    return true;
}

// Brace specs: "oracle", "model:PATH", "remote" (couple.endpoint) or
// "remote:HOST:PORT".
ProviderPtr make_brace(const ConfigPtr& cfg, const std::string& spec) {
    psy_provider* raw = nullptr;
    if (spec == "oracle") {
        check(psy_provider_material_from_config(cfg.get(), &raw));
        return ProviderPtr(raw);
    }
    if (spec.rfind("model:", 0) == 0) {
        const std::string path = spec.substr(6);
        if (path.empty()) usage_error("--brace model: needs a file path");
        psy_model* model_raw = nullptr;
        check(psy_model_load(path.c_str(), &model_raw));
        ModelPtr model(model_raw);
        check(psy_provider_from_model(model.get(), &raw));
        return ProviderPtr(raw);
    }
    if (spec == "remote" || spec.rfind("remote:", 0) == 0) {
        const std::string endpoint = spec == "remote"
                                         ? config_string(cfg, "couple.endpoint")
                                         : spec.substr(7);
        std::string host;
        std::uint16_t port = 0;
        if (!split_endpoint(endpoint, host, port, false))
            usage_error("bad remote endpoint: " + endpoint);
        const double timeout_s = config_double(cfg, "couple.timeout_s");
        const std::string transcript = config_string(cfg, "couple.log");
        check(psy_provider_remote(host.c_str(), port, timeout_s,
                                  transcript.empty() ? nullptr
                                                     : transcript.c_str(),
                                  &raw));
        return ProviderPtr(raw);
    }
    usage_error("unknown brace spec: " + spec +
                " (expected oracle, model:PATH or remote[:HOST:PORT])");
}

double peak_abs(const double* data, std::size_t n) {
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::fabs(data[i]));
    return peak;
}

/* ---- subcommands --------------------------------------------------- */

int run_protocol_gen(const CommonOpts& common, const std::string& out_path) {
    ConfigPtr cfg = build_config(common);
    psy_series* raw = nullptr;
    check(psy_protocol_from_config(cfg.get(), &raw));
    SeriesPtr protocol(raw);
    check(psy_series_save_csv(protocol.get(), out_path.c_str()));
    save_sidecar(cfg, out_path);
    std::cout << "protocol written to " << out_path << " ("
              << psy_series_size(protocol.get()) << " samples)\n";
    return 0;
}

int run_pushover(const CommonOpts& common, const std::string& out_path,
                 const std::string& brace_spec,
                 const std::string& protocol_path) {
    ConfigPtr cfg = build_config(common);
    SeriesPtr protocol;
    psy_series* series_raw = nullptr;
    if (protocol_path.empty()) {
        check(psy_protocol_from_config(cfg.get(), &series_raw));
    } else {
        check(psy_series_load_csv(protocol_path.c_str(), &series_raw));
    }
    protocol.reset(series_raw);
    ProviderPtr brace = make_brace(cfg, brace_spec);
    psy_series* record_raw = nullptr;
    check(psy_pushover(brace.get(), protocol.get(), &record_raw));
    SeriesPtr record(record_raw);
    check(psy_series_save_csv(record.get(), out_path.c_str()));
    save_sidecar(cfg, out_path);
    const std::size_t n = psy_series_size(record.get());
    std::cout << "record written to " << out_path << " (" << n << " samples)\n"
              << "peak displacement = "
              << format_number(peak_abs(psy_series_x(record.get()), n))
              << " mm, peak force = "
              << format_number(peak_abs(psy_series_force(record.get()), n))
              << " kN\n";
    return 0;
}

int run_train(const CommonOpts& common, const std::string& data_path,
              const std::string& out_path) {
    ConfigPtr cfg = build_config(common);
    psy_series* data_raw = nullptr;
    check(psy_series_load_csv(data_path.c_str(), &data_raw));
    SeriesPtr data(data_raw);
    psy_model* model_raw = nullptr;
    psy_train_report report{};
    check(psy_train_cfg(data.get(), cfg.get(), &model_raw, &report));
    ModelPtr model(model_raw);
    check(psy_model_save(model.get(), out_path.c_str()));
    save_sidecar(cfg, out_path);
    std::cout << "model written to " << out_path << "\n"
              << "m = " << psy_model_m(model.get())
              << ", lambda = " << format_number(report.lambda) << "\n"
              << "active terms = " << report.active_terms << " of "
              << psy_model_m(model.get()) + 2 << "\n"
              << "sweeps = " << report.sweeps
              << ", worst KKT violation = "
              << format_number(report.worst_violation) << "\n"
              << "training NRMSE = " << format_percent(report.nrmse_train)
              << "\n";
    return 0;
}

int run_simulate(const CommonOpts& common, const std::string& out_path,
                 const std::string& brace_spec) {
    ConfigPtr cfg = build_config(common);
    psy_frame* frame_raw = nullptr;
    check(psy_frame_from_config(cfg.get(), &frame_raw));
    FramePtr frame(frame_raw);
    psy_motion* motion_raw = nullptr;
    check(psy_motion_from_config(cfg.get(), &motion_raw));
    MotionPtr motion(motion_raw);
    ProviderPtr brace = make_brace(cfg, brace_spec);

    psy_history* history_raw = nullptr;
    const psy_status st = psy_simulate(frame.get(), motion.get(), brace.get(),
                                       cfg.get(), &history_raw);
    HistoryPtr history(history_raw);
    if (history && psy_history_size(history.get()) > 0) {
        check(psy_history_save_csv(history.get(), out_path.c_str()));
        save_sidecar(cfg, out_path);
    }
    if (st != PSY_OK) {
        std::cerr << "error: " << psy_status_name(st) << ": "
                  << psy_last_error() << "\n";
        if (history && psy_history_size(history.get()) > 0)
            std::cerr << "partial history ("
                      << psy_history_size(history.get())
                      << " samples) written to " << out_path << "\n";
        return exit_code_for(st);
    }
    const std::size_t n = psy_history_size(history.get());
    std::cout << "history written to " << out_path << " (" << n
              << " samples)\n"
              << "peak drift = "
              << format_number(psy_history_peak_drift(history.get()))
              << ", peak brace force = "
              << format_number(
                     peak_abs(psy_history_col(history.get(), "R_brace"), n))
              << " kN\n";
    return 0;
}

psy_server* g_server = nullptr;

extern "C" void on_stop_signal(int sig) {
    if (g_server != nullptr) psy_server_request_stop(g_server);
    std::signal(sig, SIG_DFL);
}

int run_serve(const CommonOpts& common, const std::string& model_path,
              bool once) {
    ConfigPtr cfg = build_config(common);
    psy_model* model_raw = nullptr;
    check(psy_model_load(model_path.c_str(), &model_raw));
    ModelPtr model(model_raw);

    const std::string endpoint = config_string(cfg, "couple.endpoint");
    std::string host;
    std::uint16_t port = 0;
    if (!split_endpoint(endpoint, host, port, true))
        usage_error("bad couple.endpoint: " + endpoint);
    const double timeout_s = config_double(cfg, "couple.timeout_s");
    const std::string transcript = config_string(cfg, "couple.log");

    psy_server* server_raw = nullptr;
    check(psy_server_create(model.get(), host.c_str(), port, timeout_s,
                            transcript.empty() ? nullptr : transcript.c_str(),
                            &server_raw));
    ServerPtr server(server_raw);
    g_server = server.get();
    std::signal(SIGINT, on_stop_signal);
    std::signal(SIGTERM, on_stop_signal);

    std::cout << "listening on " << host << ":"
              << psy_server_port(server.get()) << std::endl;
    if (once) {
        int served = 0;
        check(psy_server_serve_one(server.get(), &served));
        std::cout << (served ? "session complete\n" : "stopped\n");
    } else {
        check(psy_server_serve(server.get()));
        std::cout << "stopped\n";
    }
    g_server = nullptr;
    return 0;
}

int run_compare(const std::string& ref_path, const std::string& test_path) {
    psy_history* ref_raw = nullptr;
    check(psy_history_load_csv(ref_path.c_str(), &ref_raw));
    HistoryPtr ref(ref_raw);
    psy_history* test_raw = nullptr;
    check(psy_history_load_csv(test_path.c_str(), &test_raw));
    HistoryPtr test(test_raw);

    psy_compare_report report{};
    check(psy_compare(ref.get(), test.get(), &report));
    const double denom = std::fabs(report.peak_drift_ref);
    const double discrepancy =
        denom > 0.0
            ? std::fabs(report.peak_drift_test - report.peak_drift_ref) / denom
            : 0.0;
    std::cout << "nrmse drift = " << format_percent(report.nrmse_drift) << "\n"
              << "nrmse force = " << format_percent(report.nrmse_force) << "\n"
              << "peak drift ref = " << format_number(report.peak_drift_ref)
              << ", test = " << format_number(report.peak_drift_test) << "\n"
              << "peak drift discrepancy = " << format_percent(discrepancy)
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hysteretic brace identification and frame simulation"};
    app.set_version_flag("--version", "1.0.0");
    app.require_subcommand(1);

    CommonOpts common;

    CLI::App* protocol_gen = app.add_subcommand(
        "protocol-gen", "write the cyclic loading protocol as a t,x series");
    std::string pg_out;
    std::string pg_amplitudes;
    long pg_ppb = 0;
    add_common(protocol_gen, common);
    protocol_gen->add_option("--out", pg_out, "output CSV path")->required();
    protocol_gen->add_option("--amplitudes", pg_amplitudes,
                             "branch amplitudes, comma separated (mm)");
    protocol_gen->add_option("--points-per-branch", pg_ppb,
                             "samples per branch including endpoints");

    CLI::App* pushover = app.add_subcommand(
        "pushover", "run a displacement-controlled cyclic test on a brace");
    std::string po_out;
    std::string po_brace = "oracle";
    std::string po_protocol;
    std::string po_amplitudes;
    long po_ppb = 0;
    add_common(pushover, common);
    pushover->add_option("--out", po_out, "output CSV path (t,x,R)")->required();
    pushover->add_option("--brace", po_brace,
                         "oracle | model:PATH | remote[:HOST:PORT]");
    pushover->add_option("--protocol", po_protocol,
                         "displacement series CSV (default: generated)");
    pushover->add_option("--amplitudes", po_amplitudes,
                         "branch amplitudes, comma separated (mm)");
    pushover->add_option("--points-per-branch", po_ppb,
                         "samples per branch including endpoints");

    CLI::App* train = app.add_subcommand(
        "train", "fit a hysteresis model to a measured t,x,R series");
    std::string tr_data;
    std::string tr_out;
    long tr_m = 0;
    double tr_lambda = -1.0;
    add_common(train, common);
    train->add_option("--data", tr_data, "training CSV (t,x,R)")->required();
    train->add_option("--out", tr_out, "output model JSON path")->required();
    train->add_option("--m", tr_m, "number of stop operators");
    train->add_option("--lambda", tr_lambda, "sparse regression weight");

    CLI::App* simulate = app.add_subcommand(
        "simulate", "response-history analysis of the braced frame");
    std::string sim_out;
    std::string sim_brace = "oracle";
    std::string sim_scheme;
    add_common(simulate, common);
    simulate->add_option("--out", sim_out, "output history CSV path")
        ->required();
    simulate->add_option("--brace", sim_brace,
                         "oracle | model:PATH | remote[:HOST:PORT]");
    simulate->add_option("--scheme", sim_scheme, "explicit | implicit");

    CLI::App* serve = app.add_subcommand(
        "serve", "serve a trained model to a remote simulation");
    std::string sv_model;
    std::string sv_endpoint;
    std::string sv_transcript;
    bool sv_once = false;
    add_common(serve, common);
    serve->add_option("--model", sv_model, "model JSON path")->required();
    serve->add_option("--endpoint", sv_endpoint,
                      "HOST:PORT to listen on (port 0 picks a free one)");
    serve->add_option("--transcript", sv_transcript,
                      "hex log of the wire exchange");
    serve->add_flag("--once", sv_once, "serve one session, then exit");

    CLI::App* compare = app.add_subcommand(
        "compare", "compare two response histories sample by sample");
    std::string cm_ref;
    std::string cm_test;
    compare->add_option("--ref", cm_ref, "reference history CSV")->required();
    compare->add_option("--test", cm_test, "candidate history CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    // Convenience flags win over --set, which wins over --config.
    if (!pg_amplitudes.empty())
        common.overrides.push_back("protocol.amplitudes=" + pg_amplitudes);
    if (pg_ppb > 0)
        common.overrides.push_back("protocol.points_per_branch=" +
                                   std::to_string(pg_ppb));
    if (!po_amplitudes.empty())
        common.overrides.push_back("protocol.amplitudes=" + po_amplitudes);
    if (po_ppb > 0)
        common.overrides.push_back("protocol.points_per_branch=" +
                                   std::to_string(po_ppb));
    if (tr_m > 0) common.overrides.push_back("train.m=" + std::to_string(tr_m));
    if (tr_lambda >= 0.0)
        common.overrides.push_back("train.lambda=" + format_number(tr_lambda));
    if (!sim_scheme.empty())
        common.overrides.push_back("sim.scheme=" + sim_scheme);
    if (!sv_endpoint.empty())
        common.overrides.push_back("couple.endpoint=" + sv_endpoint);
    if (!sv_transcript.empty())
        common.overrides.push_back("couple.log=" + sv_transcript);

    try {
        if (app.got_subcommand(protocol_gen))
            return run_protocol_gen(common, pg_out);
        if (app.got_subcommand(pushover))
            return run_pushover(common, po_out, po_brace, po_protocol);
        if (app.got_subcommand(train)) return run_train(common, tr_data, tr_out);
        if (app.got_subcommand(simulate))
            return run_simulate(common, sim_out, sim_brace);
        if (app.got_subcommand(serve)) return run_serve(common, sv_model, sv_once);
        if (app.got_subcommand(compare)) return run_compare(cm_ref, cm_test);
    } catch (const ExitWith& e) {
        return e.code;
    }
    return 1;
}
