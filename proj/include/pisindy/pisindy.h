/* pisindy - hysteresis identification and substructured frame simulation.
 *
 * C interface of the shared library. Every fallible call returns a
 * psy_status; PSY_OK is 0. On failure the thread-local message from
 * psy_last_error() describes the problem, and output parameters are
 * left null/unchanged unless documented otherwise. Handles are freed
 * with their matching psy_*_free, which accept NULL.
 *
 * Units throughout: displacements mm, forces kN, time s, mass t,
 * stiffness kN/mm, accelerations mm/s^2 (g = 9806.65 mm/s^2).
 */
#ifndef PISINDY_H
#define PISINDY_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum psy_status {
    PSY_OK = 0,
    PSY_ERR_INVALID_ARGUMENT = 1,
    PSY_ERR_DIMENSION_MISMATCH = 2,
    PSY_ERR_LENGTH_MISMATCH = 3,
    PSY_ERR_EMPTY_SERIES = 4,
    PSY_ERR_NON_POSITIVE_THRESHOLD = 5,
    PSY_ERR_DEGENERATE_INPUT = 6,
    PSY_ERR_DEGENERATE_REFERENCE = 7,
    PSY_ERR_NON_CONVERGENCE = 8,
    PSY_ERR_MALFORMED_FILE = 9,
    PSY_ERR_SCHEMA_VERSION_MISMATCH = 10,
    PSY_ERR_UNKNOWN_UNITS = 11,
    PSY_ERR_STABILITY_VIOLATION = 12,
    PSY_ERR_DIVERGENCE = 13,
    PSY_ERR_PROTOCOL_MISUSE = 14,
    PSY_ERR_BAD_MAGIC = 15,
    PSY_ERR_UNSUPPORTED_VERSION = 16,
    PSY_ERR_TRUNCATED_FRAME = 17,
    PSY_ERR_MALFORMED_FRAME = 18,
    PSY_ERR_PROVIDER_FAULT = 19,
    PSY_ERR_CONFIG = 20,
    PSY_ERR_IO = 21,
    PSY_ERR_INTERNAL = 22
} psy_status;

/* Stable name of a status code, e.g. "NonConvergence". */
const char* psy_status_name(psy_status status);

/* Message of the calling thread's most recent failure; never NULL. */
const char* psy_last_error(void);

typedef struct psy_config psy_config;
typedef struct psy_series psy_series;
typedef struct psy_model psy_model;
typedef struct psy_provider psy_provider;
typedef struct psy_motion psy_motion;
typedef struct psy_frame psy_frame;
typedef struct psy_history psy_history;
typedef struct psy_server psy_server;

/* ------------------------------------------------------------------ *
 * Run configuration: registered key/value pairs with defaults.
 * ------------------------------------------------------------------ */

psy_status psy_config_create(psy_config** out);
psy_status psy_config_load_file(psy_config* cfg, const char* path);
psy_status psy_config_set(psy_config* cfg, const char* key, const char* value);
/* "key=value" form used for command-line overrides. */
psy_status psy_config_override(psy_config* cfg, const char* assignment);
/* Canonical value string; the pointer stays valid until the next call
 * on this config. */
psy_status psy_config_get(psy_config* cfg, const char* key, const char** out);
/* Writes the fully resolved `key = value` listing. */
psy_status psy_config_save(const psy_config* cfg, const char* path);
void psy_config_free(psy_config* cfg);

/* ------------------------------------------------------------------ *
 * Signal series: paired t/x(/R) samples, CSV header `t,x[,R]`.
 * ------------------------------------------------------------------ */

psy_status psy_series_create(const double* t, const double* x,
                             const double* force_or_null, size_t n,
                             psy_series** out);
psy_status psy_series_load_csv(const char* path, psy_series** out);
psy_status psy_series_save_csv(const psy_series* series, const char* path);
size_t psy_series_size(const psy_series* series);
int psy_series_has_force(const psy_series* series);
const double* psy_series_t(const psy_series* series);
const double* psy_series_x(const psy_series* series);
/* NULL when the series has no force column. */
const double* psy_series_force(const psy_series* series);
void psy_series_free(psy_series* series);

/* ------------------------------------------------------------------ *
 * Cyclic loading protocol and displacement-controlled pushover.
 * ------------------------------------------------------------------ */

psy_status psy_protocol_generate(const double* amplitudes, size_t n_amplitudes,
                                 size_t points_per_branch, psy_series** out);
/* protocol.* keys. */
psy_status psy_protocol_from_config(const psy_config* cfg, psy_series** out);
/* Sweeps the protocol displacements through the provider and returns
 * the paired displacement/force record. */
psy_status psy_pushover(psy_provider* material, const psy_series* protocol,
                        psy_series** out);

/* ------------------------------------------------------------------ *
 * Force providers: oracle materials, trained models, remote braces.
 * All follow the same session contract: init once, then step;
 * snapshot/restore give one slot of rollback.
 * ------------------------------------------------------------------ */

psy_status psy_provider_bilinear(double k1, double k2, double dy,
                                 psy_provider** out);
psy_status psy_provider_gmp(double k0, double fy, double b, double r0,
                            double cr1, double cr2, psy_provider** out);
/* material.* keys. */
psy_status psy_provider_material_from_config(const psy_config* cfg,
                                             psy_provider** out);
psy_status psy_provider_from_model(const psy_model* model, psy_provider** out);
/* Connects lazily on the first init; transcript_or_null enables a hex
 * log of the wire exchange. */
psy_status psy_provider_remote(const char* host, uint16_t port,
                               double timeout_s,
                               const char* transcript_or_null,
                               psy_provider** out);
psy_status psy_provider_init(psy_provider* provider, double x0,
                             double* force_out);
psy_status psy_provider_step(psy_provider* provider, double x,
                             double* force_out);
psy_status psy_provider_snapshot(psy_provider* provider);
psy_status psy_provider_restore(psy_provider* provider);
void psy_provider_free(psy_provider* provider);

/* ------------------------------------------------------------------ *
 * Training and trained models.
 * ------------------------------------------------------------------ */

typedef struct psy_train_report {
    size_t sweeps;
    double worst_violation;
    double objective;
    double nrmse_train;
    size_t active_terms;
    double lambda;
} psy_train_report;

psy_status psy_train(const psy_series* data, size_t m, double lambda,
                     psy_model** out, psy_train_report* report_or_null);
/* train.* keys. */
psy_status psy_train_cfg(const psy_series* data, const psy_config* cfg,
                         psy_model** out, psy_train_report* report_or_null);
psy_status psy_model_load(const char* path, psy_model** out);
psy_status psy_model_save(const psy_model* model, const char* path);
size_t psy_model_m(const psy_model* model);
double psy_model_x_max_train(const psy_model* model);
double psy_model_nrmse_train(const psy_model* model);
size_t psy_model_active_terms(const psy_model* model);
/* Batch response on a displacement series; saturated_fraction_or_null
 * receives the fraction of samples beyond the training peak. */
psy_status psy_model_predict(const psy_model* model, const psy_series* x,
                             psy_series** forces_out,
                             double* saturated_fraction_or_null);
void psy_model_free(psy_model* model);

/* Root-mean-square error of test against ref, normalised by the range
 * of ref. */
psy_status psy_nrmse(const double* ref, const double* test, size_t n,
                     double* out);

/* ------------------------------------------------------------------ *
 * Ground motions.
 * ------------------------------------------------------------------ */

/* format: "csv2col" | "peer_at2"; units: "g" | "mm_s2" | "m_s2"
 * (csv2col only; a unit suffix in the file header wins). */
psy_status psy_motion_load(const char* path, const char* format,
                           const char* units, double scale, psy_motion** out);
psy_status psy_motion_synthetic(uint32_t seed, double duration, double dt,
                                double pga_g, psy_motion** out);
/* motion.* keys. */
psy_status psy_motion_from_config(const psy_config* cfg, psy_motion** out);
double psy_motion_dt(const psy_motion* motion);
size_t psy_motion_size(const psy_motion* motion);
const double* psy_motion_accel(const psy_motion* motion);
void psy_motion_free(psy_motion* motion);

/* ------------------------------------------------------------------ *
 * Frame model and response-history simulation.
 * ------------------------------------------------------------------ */

/* frame.* keys (mass = 0 calibrates it to frame.period_target). */
psy_status psy_frame_from_config(const psy_config* cfg, psy_frame** out);
psy_status psy_frame_create(double mass_t, double k_frame, double zeta,
                            double height, double theta,
                            double k_brace_nominal, psy_frame** out);
psy_status psy_frame_period(const psy_frame* frame, double k_brace,
                            double* out);
void psy_frame_free(psy_frame* frame);

/* Runs the response-history analysis with the brace provider plugged
 * into the frame. cfg_or_null supplies the sim.* keys (NULL for
 * defaults). If integration fails mid-run, *out still receives the
 * partial history of all committed steps alongside the error code. */
psy_status psy_simulate(const psy_frame* frame, const psy_motion* motion,
                        psy_provider* brace, const psy_config* cfg_or_null,
                        psy_history** out);

size_t psy_history_size(const psy_history* history);
/* name: "t","u","v","a","x_brace","R_brace","drift"; NULL if unknown. */
const double* psy_history_col(const psy_history* history, const char* name);
double psy_history_peak_drift(const psy_history* history);
psy_status psy_history_save_csv(const psy_history* history, const char* path);
psy_status psy_history_load_csv(const char* path, psy_history** out);
void psy_history_free(psy_history* history);

typedef struct psy_compare_report {
    double nrmse_drift;
    double nrmse_force;
    double peak_drift_ref;
    double peak_drift_test;
} psy_compare_report;

psy_status psy_compare(const psy_history* ref, const psy_history* test,
                       psy_compare_report* out);

/* ------------------------------------------------------------------ *
 * Coupling server: serves a trained model over the wire protocol,
 * one connection at a time.
 * ------------------------------------------------------------------ */

psy_status psy_server_create(const psy_model* model, const char* host,
                             uint16_t port, double timeout_s,
                             const char* transcript_or_null,
                             psy_server** out);
/* Actual bound port (after binding port 0). */
uint16_t psy_server_port(const psy_server* server);
/* Blocks, serving sessions until psy_server_request_stop. */
psy_status psy_server_serve(psy_server* server);
/* Handles exactly one session; *served_out = 0 if stopped first. */
psy_status psy_server_serve_one(psy_server* server, int* served_out);
/* Async-signal-safe. */
void psy_server_request_stop(psy_server* server);
void psy_server_free(psy_server* server);

#ifdef __cplusplus
}
#endif

#endif /* PISINDY_H */
