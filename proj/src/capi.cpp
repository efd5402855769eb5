// C interface of the shared library. Every handle is a thin struct
// around the corresponding core type; exceptions are caught at this
// boundary and mapped to status codes, with the message stored per
// thread for psy_last_error().

#include "pisindy/pisindy.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "coupling.hpp"
#include "errors.hpp"
#include "frame.hpp"
#include "materials.hpp"
#include "pi_sindy.hpp"
#include "provider.hpp"
#include "series.hpp"

using pisindy::ErrorCode;

// The two code lists must stay in lockstep.
static_assert(static_cast<int>(ErrorCode::invalid_argument) == PSY_ERR_INVALID_ARGUMENT);
static_assert(static_cast<int>(ErrorCode::dimension_mismatch) == PSY_ERR_DIMENSION_MISMATCH);
static_assert(static_cast<int>(ErrorCode::length_mismatch) == PSY_ERR_LENGTH_MISMATCH);
static_assert(static_cast<int>(ErrorCode::empty_series) == PSY_ERR_EMPTY_SERIES);
static_assert(static_cast<int>(ErrorCode::non_positive_threshold) == PSY_ERR_NON_POSITIVE_THRESHOLD);
static_assert(static_cast<int>(ErrorCode::degenerate_input) == PSY_ERR_DEGENERATE_INPUT);
static_assert(static_cast<int>(ErrorCode::degenerate_reference) == PSY_ERR_DEGENERATE_REFERENCE);
static_assert(static_cast<int>(ErrorCode::non_convergence) == PSY_ERR_NON_CONVERGENCE);
static_assert(static_cast<int>(ErrorCode::malformed_file) == PSY_ERR_MALFORMED_FILE);
static_assert(static_cast<int>(ErrorCode::schema_version_mismatch) == PSY_ERR_SCHEMA_VERSION_MISMATCH);
static_assert(static_cast<int>(ErrorCode::unknown_units) == PSY_ERR_UNKNOWN_UNITS);
static_assert(static_cast<int>(ErrorCode::stability_violation) == PSY_ERR_STABILITY_VIOLATION);
static_assert(static_cast<int>(ErrorCode::divergence) == PSY_ERR_DIVERGENCE);
static_assert(static_cast<int>(ErrorCode::protocol_misuse) == PSY_ERR_PROTOCOL_MISUSE);
static_assert(static_cast<int>(ErrorCode::bad_magic) == PSY_ERR_BAD_MAGIC);
static_assert(static_cast<int>(ErrorCode::unsupported_version) == PSY_ERR_UNSUPPORTED_VERSION);
static_assert(static_cast<int>(ErrorCode::truncated_frame) == PSY_ERR_TRUNCATED_FRAME);
static_assert(static_cast<int>(ErrorCode::malformed_frame) == PSY_ERR_MALFORMED_FRAME);
static_assert(static_cast<int>(ErrorCode::provider_fault) == PSY_ERR_PROVIDER_FAULT);
static_assert(static_cast<int>(ErrorCode::config_error) == PSY_ERR_CONFIG);
static_assert(static_cast<int>(ErrorCode::io_error) == PSY_ERR_IO);
static_assert(static_cast<int>(ErrorCode::internal_error) == PSY_ERR_INTERNAL);

struct psy_config {
    pisindy::RunConfig cfg;
    std::string scratch; // backs the pointer handed out by psy_config_get
};

struct psy_series {
    pisindy::SignalSeries series;
};

struct psy_model {
    pisindy::PiModel model;
    pisindy::TrainReport report;
    bool has_report = false;
};

struct psy_provider {
    std::unique_ptr<pisindy::ForceProvider> provider;
};

struct psy_motion {
    pisindy::GroundMotion motion;
};

struct psy_frame {
    pisindy::FrameModel frame;
};

struct psy_history {
    pisindy::ResponseHistory history;
};

struct psy_server {
    pisindy::ModelServer server;

    psy_server(pisindy::PiModel model, const std::string& host,
               std::uint16_t port, pisindy::ServerOptions opt)
        : server(std::move(model), host, port, std::move(opt)) {}
};

namespace {

thread_local std::string t_last_error;

template <typename Fn>
psy_status wrap(Fn&& fn) noexcept {
    try {
        fn();
        return PSY_OK;
    } catch (const pisindy::Error& e) {
        t_last_error = e.what();
        return static_cast<psy_status>(static_cast<int>(e.code()));
    } catch (const std::bad_alloc&) {
        t_last_error = "out of memory";
        return PSY_ERR_INTERNAL;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return PSY_ERR_INTERNAL;
    }
}

psy_status fail_null(const char* name) noexcept {
    try {
        t_last_error = std::string("null argument: ") + name;
    } catch (...) {
    }
    return PSY_ERR_INVALID_ARGUMENT;
}

std::size_t model_active_terms(const pisindy::PiModel& model) {
    auto nonzero = [](double v) { return v != 0.0; };
    std::size_t n = static_cast<std::size_t>(
        std::count_if(model.weights.begin(), model.weights.end(), nonzero));
    if (model.linear != 0.0) ++n;
    if (model.constant != 0.0) ++n;
    return n;
}

void fill_report(const pisindy::TrainReport& src, psy_train_report* dst) {
    if (dst == nullptr) return;
    dst->sweeps = src.sweeps;
    dst->worst_violation = src.worst_violation;
    dst->objective = src.objective;
    dst->nrmse_train = src.nrmse_train;
    dst->active_terms = src.active_terms;
    dst->lambda = src.lambda;
}

} // namespace

#define PSY_REQUIRE(p) \
    do { \
        if ((p) == nullptr) return fail_null(#p); \
    } while (0)

extern "C" {

const char* psy_status_name(psy_status status) {
    if (status == PSY_OK) return "Ok";
    return pisindy::error_code_name(static_cast<ErrorCode>(status));
}

const char* psy_last_error(void) { return t_last_error.c_str(); }

/* ---- config ------------------------------------------------------ */

psy_status psy_config_create(psy_config** out) {
    PSY_REQUIRE(out);
    return wrap([&] { *out = new psy_config{}; });
}

psy_status psy_config_load_file(psy_config* cfg, const char* path) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(path);
    return wrap([&] { cfg->cfg.apply_file(path); });
}

psy_status psy_config_set(psy_config* cfg, const char* key, const char* value) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(key);
    PSY_REQUIRE(value);
    return wrap([&] { cfg->cfg.set(key, value); });
}

psy_status psy_config_override(psy_config* cfg, const char* assignment) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(assignment);
    return wrap([&] { cfg->cfg.apply_override(assignment); });
}

psy_status psy_config_get(psy_config* cfg, const char* key, const char** out) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(key);
    PSY_REQUIRE(out);
    return wrap([&] {
        cfg->scratch = cfg->cfg.get(key);
        *out = cfg->scratch.c_str();
    });
}

psy_status psy_config_save(const psy_config* cfg, const char* path) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(path);
    return wrap([&] { cfg->cfg.save(path); });
}

void psy_config_free(psy_config* cfg) { delete cfg; }

/* ---- series ------------------------------------------------------ */

psy_status psy_series_create(const double* t, const double* x,
                             const double* force_or_null, size_t n,
                             psy_series** out) {
    PSY_REQUIRE(t);
    PSY_REQUIRE(x);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::SignalSeries series;
        series.t.assign(t, t + n);
        series.x.assign(x, x + n);
        if (force_or_null != nullptr)
            series.force.assign(force_or_null, force_or_null + n);
        series.validate();
        *out = new psy_series{std::move(series)};
    });
}

psy_status psy_series_load_csv(const char* path, psy_series** out) {
    PSY_REQUIRE(path);
    PSY_REQUIRE(out);
    return wrap([&] { *out = new psy_series{pisindy::load_series_csv(path)}; });
}

psy_status psy_series_save_csv(const psy_series* series, const char* path) {
    PSY_REQUIRE(series);
    PSY_REQUIRE(path);
    return wrap([&] { pisindy::save_series_csv(series->series, path); });
}

size_t psy_series_size(const psy_series* series) {
    return series ? series->series.size() : 0;
}

int psy_series_has_force(const psy_series* series) {
    return (series && series->series.has_force()) ? 1 : 0;
}

const double* psy_series_t(const psy_series* series) {
    return series ? series->series.t.data() : nullptr;
}

const double* psy_series_x(const psy_series* series) {
    return series ? series->series.x.data() : nullptr;
}

const double* psy_series_force(const psy_series* series) {
    if (series == nullptr || !series->series.has_force()) return nullptr;
    return series->series.force.data();
}

void psy_series_free(psy_series* series) { delete series; }

/* ---- protocol and pushover --------------------------------------- */

psy_status psy_protocol_generate(const double* amplitudes, size_t n_amplitudes,
                                 size_t points_per_branch, psy_series** out) {
    PSY_REQUIRE(amplitudes);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::LoadingProtocol protocol;
        protocol.amplitudes.assign(amplitudes, amplitudes + n_amplitudes);
        protocol.points_per_branch = points_per_branch;
        *out = new psy_series{pisindy::generate_protocol(protocol)};
    });
}

psy_status psy_protocol_from_config(const psy_config* cfg, psy_series** out) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_series{
            pisindy::generate_protocol(pisindy::protocol_from_config(cfg->cfg))};
    });
}

psy_status psy_pushover(psy_provider* material, const psy_series* protocol,
                        psy_series** out) {
    PSY_REQUIRE(material);
    PSY_REQUIRE(protocol);
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_series{pisindy::run_cyclic_pushover(*material->provider,
                                                           protocol->series)};
    });
}

/* ---- providers ---------------------------------------------------- */

psy_status psy_provider_bilinear(double k1, double k2, double dy,
                                 psy_provider** out) {
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_provider{
            std::make_unique<pisindy::BilinearMaterial>(k1, k2, dy)};
    });
}

psy_status psy_provider_gmp(double k0, double fy, double b, double r0,
                            double cr1, double cr2, psy_provider** out) {
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_provider{
            std::make_unique<pisindy::GmpMaterial>(k0, fy, b, r0, cr1, cr2)};
    });
}

psy_status psy_provider_material_from_config(const psy_config* cfg,
                                             psy_provider** out) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_provider{pisindy::material_from_config(cfg->cfg)};
    });
}

psy_status psy_provider_from_model(const psy_model* model, psy_provider** out) {
    PSY_REQUIRE(model);
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_provider{
            std::make_unique<pisindy::ModelSession>(model->model)};
    });
}

psy_status psy_provider_remote(const char* host, uint16_t port,
                               double timeout_s,
                               const char* transcript_or_null,
                               psy_provider** out) {
    PSY_REQUIRE(host);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::ClientOptions opt;
        opt.timeout_s = timeout_s;
        if (transcript_or_null != nullptr) opt.transcript_path = transcript_or_null;
        *out = new psy_provider{
            std::make_unique<pisindy::RemoteBraceProvider>(host, port, opt)};
    });
}

psy_status psy_provider_init(psy_provider* provider, double x0,
                             double* force_out) {
    PSY_REQUIRE(provider);
    return wrap([&] {
        double r = provider->provider->init(x0);
        if (force_out != nullptr) *force_out = r;
    });
}

psy_status psy_provider_step(psy_provider* provider, double x,
                             double* force_out) {
    PSY_REQUIRE(provider);
    return wrap([&] {
        double r = provider->provider->step(x);
        if (force_out != nullptr) *force_out = r;
    });
}

psy_status psy_provider_snapshot(psy_provider* provider) {
    PSY_REQUIRE(provider);
    return wrap([&] { provider->provider->snapshot(); });
}

psy_status psy_provider_restore(psy_provider* provider) {
    PSY_REQUIRE(provider);
    return wrap([&] { provider->provider->restore(); });
}

void psy_provider_free(psy_provider* provider) { delete provider; }

/* ---- training and models ------------------------------------------ */

psy_status psy_train(const psy_series* data, size_t m, double lambda,
                     psy_model** out, psy_train_report* report_or_null) {
    PSY_REQUIRE(data);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::TrainOptions opt;
        opt.m = m;
        opt.lambda = lambda;
        pisindy::TrainReport report;
        pisindy::PiModel model = pisindy::train(data->series, opt, &report);
        fill_report(report, report_or_null);
        *out = new psy_model{std::move(model), report, true};
    });
}

psy_status psy_train_cfg(const psy_series* data, const psy_config* cfg,
                         psy_model** out, psy_train_report* report_or_null) {
    PSY_REQUIRE(data);
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::TrainOptions opt = pisindy::train_options_from_config(cfg->cfg);
        pisindy::TrainReport report;
        pisindy::PiModel model = pisindy::train(data->series, opt, &report);
        fill_report(report, report_or_null);
        *out = new psy_model{std::move(model), report, true};
    });
}

psy_status psy_model_load(const char* path, psy_model** out) {
    PSY_REQUIRE(path);
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_model{pisindy::load_model(path), {}, false};
    });
}

psy_status psy_model_save(const psy_model* model, const char* path) {
    PSY_REQUIRE(model);
    PSY_REQUIRE(path);
    return wrap([&] {
        pisindy::save_model(model->model, path,
                            model->has_report ? &model->report : nullptr);
    });
}

size_t psy_model_m(const psy_model* model) {
    return model ? model->model.thresholds.size() : 0;
}

double psy_model_x_max_train(const psy_model* model) {
    return model ? model->model.x_max_train : 0.0;
}

double psy_model_nrmse_train(const psy_model* model) {
    return model ? model->model.nrmse_train : 0.0;
}

size_t psy_model_active_terms(const psy_model* model) {
    return model ? model_active_terms(model->model) : 0;
}

psy_status psy_model_predict(const psy_model* model, const psy_series* x,
                             psy_series** forces_out,
                             double* saturated_fraction_or_null) {
    PSY_REQUIRE(model);
    PSY_REQUIRE(x);
    PSY_REQUIRE(forces_out);
    return wrap([&] {
        pisindy::Prediction prediction =
            pisindy::predict_detailed(model->model, x->series.x);
        pisindy::SignalSeries result;
        result.t = x->series.t;
        result.x = x->series.x;
        result.force = std::move(prediction.forces);
        if (saturated_fraction_or_null != nullptr)
            *saturated_fraction_or_null = prediction.saturated_fraction;
        *forces_out = new psy_series{std::move(result)};
    });
}

void psy_model_free(psy_model* model) { delete model; }

psy_status psy_nrmse(const double* ref, const double* test, size_t n,
                     double* out) {
    PSY_REQUIRE(ref);
    PSY_REQUIRE(test);
    PSY_REQUIRE(out);
    return wrap([&] {
        std::vector<double> r(ref, ref + n);
        std::vector<double> m(test, test + n);
        *out = pisindy::nrmse(r, m);
    });
}

/* ---- ground motions ------------------------------------------------ */

psy_status psy_motion_load(const char* path, const char* format,
                           const char* units, double scale, psy_motion** out) {
    PSY_REQUIRE(path);
    PSY_REQUIRE(format);
    PSY_REQUIRE(units);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::MotionFormat fmt;
        if (std::strcmp(format, "csv2col") == 0) {
            fmt = pisindy::MotionFormat::csv2col;
        } else if (std::strcmp(format, "peer_at2") == 0) {
            fmt = pisindy::MotionFormat::peer_at2;
        } else {
            pisindy::raise(ErrorCode::invalid_argument,
                           std::string("unknown motion format: ") + format);
        }
        pisindy::AccelUnits un;
        if (std::strcmp(units, "g") == 0) {
            un = pisindy::AccelUnits::g;
        } else if (std::strcmp(units, "mm_s2") == 0) {
            un = pisindy::AccelUnits::mm_s2;
        } else if (std::strcmp(units, "m_s2") == 0) {
            un = pisindy::AccelUnits::m_s2;
        } else if (std::strcmp(units, "from_header") == 0) {
            un = pisindy::AccelUnits::from_header;
        } else {
            pisindy::raise(ErrorCode::unknown_units,
                           std::string("unknown acceleration units: ") + units);
        }
        *out = new psy_motion{pisindy::load_ground_motion(path, fmt, un, scale)};
    });
}

psy_status psy_motion_synthetic(uint32_t seed, double duration, double dt,
                                double pga_g, psy_motion** out) {
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_motion{pisindy::synthetic_motion(seed, duration, dt, pga_g)};
    });
}

psy_status psy_motion_from_config(const psy_config* cfg, psy_motion** out) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(out);
    return wrap([&] {
        *out = new psy_motion{pisindy::motion_from_config(cfg->cfg)};
    });
}

double psy_motion_dt(const psy_motion* motion) {
    return motion ? motion->motion.dt : 0.0;
}

size_t psy_motion_size(const psy_motion* motion) {
    return motion ? motion->motion.accel.size() : 0;
}

const double* psy_motion_accel(const psy_motion* motion) {
    return motion ? motion->motion.accel.data() : nullptr;
}

void psy_motion_free(psy_motion* motion) { delete motion; }

/* ---- frame and simulation ------------------------------------------ */

psy_status psy_frame_from_config(const psy_config* cfg, psy_frame** out) {
    PSY_REQUIRE(cfg);
    PSY_REQUIRE(out);
    return wrap([&] { *out = new psy_frame{pisindy::frame_from_config(cfg->cfg)}; });
}

psy_status psy_frame_create(double mass_t, double k_frame, double zeta,
                            double height, double theta,
                            double k_brace_nominal, psy_frame** out) {
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::FrameModel frame;
        frame.mass = mass_t;
        frame.k_frame = k_frame;
        frame.zeta = zeta;
        frame.height = height;
        frame.theta = theta;
        frame.k_brace_nominal = k_brace_nominal;
        frame.validate();
        *out = new psy_frame{frame};
    });
}

psy_status psy_frame_period(const psy_frame* frame, double k_brace,
                            double* out) {
    PSY_REQUIRE(frame);
    PSY_REQUIRE(out);
    return wrap([&] { *out = pisindy::natural_period(frame->frame, k_brace); });
}

void psy_frame_free(psy_frame* frame) { delete frame; }

psy_status psy_simulate(const psy_frame* frame, const psy_motion* motion,
                        psy_provider* brace, const psy_config* cfg_or_null,
                        psy_history** out) {
    PSY_REQUIRE(frame);
    PSY_REQUIRE(motion);
    PSY_REQUIRE(brace);
    PSY_REQUIRE(out);
    *out = nullptr;
    std::unique_ptr<pisindy::SimulationEngine> engine;
    psy_status st = wrap([&] {
        pisindy::SimOptions opt;
        if (cfg_or_null != nullptr)
            opt = pisindy::sim_options_from_config(cfg_or_null->cfg);
        engine = std::make_unique<pisindy::SimulationEngine>(frame->frame,
                                                             motion->motion, opt);
    });
    if (st != PSY_OK) return st;
    st = wrap([&] { engine->run(*brace->provider); });
    psy_status st_copy =
        wrap([&] { *out = new psy_history{engine->history()}; });
    return st != PSY_OK ? st : st_copy;
}

size_t psy_history_size(const psy_history* history) {
    return history ? history->history.size() : 0;
}

const double* psy_history_col(const psy_history* history, const char* name) {
    if (history == nullptr || name == nullptr) return nullptr;
    const pisindy::ResponseHistory& h = history->history;
    if (std::strcmp(name, "t") == 0) return h.t.data();
    if (std::strcmp(name, "u") == 0) return h.u.data();
    if (std::strcmp(name, "v") == 0) return h.v.data();
    if (std::strcmp(name, "a") == 0) return h.a.data();
    if (std::strcmp(name, "x_brace") == 0) return h.x_brace.data();
    if (std::strcmp(name, "R_brace") == 0) return h.r_brace.data();
    if (std::strcmp(name, "drift") == 0) return h.drift.data();
    return nullptr;
}

double psy_history_peak_drift(const psy_history* history) {
    return history ? history->history.peak_drift() : 0.0;
}

psy_status psy_history_save_csv(const psy_history* history, const char* path) {
    PSY_REQUIRE(history);
    PSY_REQUIRE(path);
    return wrap([&] { pisindy::save_history_csv(history->history, path); });
}

psy_status psy_history_load_csv(const char* path, psy_history** out) {
    PSY_REQUIRE(path);
    PSY_REQUIRE(out);
    return wrap([&] { *out = new psy_history{pisindy::load_history_csv(path)}; });
}

void psy_history_free(psy_history* history) { delete history; }

psy_status psy_compare(const psy_history* ref, const psy_history* test,
                       psy_compare_report* out) {
    PSY_REQUIRE(ref);
    PSY_REQUIRE(test);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::CompareReport report =
            pisindy::compare_runs(ref->history, test->history);
        out->nrmse_drift = report.nrmse_drift;
        out->nrmse_force = report.nrmse_force;
        out->peak_drift_ref = report.peak_drift_ref;
        out->peak_drift_test = report.peak_drift_test;
    });
}

/* ---- server --------------------------------------------------------- */

psy_status psy_server_create(const psy_model* model, const char* host,
                             uint16_t port, double timeout_s,
                             const char* transcript_or_null,
                             psy_server** out) {
    PSY_REQUIRE(model);
    PSY_REQUIRE(host);
    PSY_REQUIRE(out);
    return wrap([&] {
        pisindy::ServerOptions opt;
        opt.timeout_s = timeout_s;
        if (transcript_or_null != nullptr) opt.transcript_path = transcript_or_null;
        *out = new psy_server(model->model, host, port, std::move(opt));
    });
}

uint16_t psy_server_port(const psy_server* server) {
    return server ? server->server.port() : 0;
}

psy_status psy_server_serve(psy_server* server) {
    PSY_REQUIRE(server);
    return wrap([&] { server->server.serve_forever(); });
}

psy_status psy_server_serve_one(psy_server* server, int* served_out) {
    PSY_REQUIRE(server);
    return wrap([&] {
        bool served = server->server.serve_one();
        if (served_out != nullptr) *served_out = served ? 1 : 0;
    });
}

void psy_server_request_stop(psy_server* server) {
    if (server != nullptr) server->server.request_stop();
}

void psy_server_free(psy_server* server) { delete server; }

} // extern "C"
