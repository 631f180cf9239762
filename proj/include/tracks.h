/* C interface to the T-RACKs data-center TCP simulator.
 *
 * Handles are opaque. Every call that can fail returns a tracks_status; the
 * message for the most recent failure on the calling thread is available
 * from tracks_last_error(). Strings returned by the library stay valid until
 * the owning handle is freed or modified. */
#ifndef TRACKS_H
#define TRACKS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TRACKS_API __declspec(dllexport)
#else
#define TRACKS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tracks_status {
    TRACKS_OK = 0,
    TRACKS_ERR_CONFIG = 2,  /* invalid configuration or input file */
    TRACKS_ERR_RUNTIME = 3, /* simulation fault or I/O failure */
    TRACKS_ERR_EXISTS = 4,  /* output directory already exists */
    TRACKS_ERR_ARGUMENT = 5 /* null handle, index out of range */
} tracks_status;

typedef struct tracks_config tracks_config;
typedef struct tracks_result tracks_result;

typedef struct tracks_flow_record {
    uint32_t flow_id;
    uint32_t src;
    uint32_t dst;
    uint64_t size_bytes;
    const char* size_class; /* "small", "medium", "large" */
    uint64_t start_us;
    int completed;
    uint64_t end_us; /* 0 when not completed */
    uint64_t fct_us; /* 0 when not completed */
    uint32_t rto_events;
    uint32_t frr_events;
    uint32_t rack_assisted_frr_events;
    uint32_t spoofed_acks_received;
    int deadline_missed;
    uint32_t round;
} tracks_flow_record;

typedef struct tracks_recovery_event {
    uint32_t flow_id;
    const char* kind; /* "frr" or "rto" */
    double cwnd_mss;
    double loss_index_fraction;
    double burst_fraction;
    uint64_t recovery_duration_us;
} tracks_recovery_event;

typedef struct tracks_flow_diagnostics {
    uint32_t flow_id;
    uint64_t delivered_bytes;
    int stream_intact;
    uint64_t cwnd_trace_hash;
    uint32_t retransmissions;
} tracks_flow_diagnostics;

typedef struct tracks_shim_counters {
    uint64_t spoofed_acks_sent;
    uint64_t dupacks_dropped;
    uint64_t episodes_opened;
    uint64_t episodes_stopped_at_rtomin;
    uint64_t flows_tracked;
    uint64_t flows_marked_long_lived;
    uint64_t untracked_flows;
} tracks_shim_counters;

typedef struct tracks_run_summary {
    uint64_t schedule_hash;
    uint64_t config_hash;
    uint64_t end_time_us;
    uint64_t events_dispatched;
    uint64_t packets_dropped;
    uint64_t packets_marked;
    uint64_t injected_drops;
    double base_rtt_us;
} tracks_run_summary;

TRACKS_API const char* tracks_version(void);
TRACKS_API const char* tracks_last_error(void);
TRACKS_API const char* tracks_status_name(tracks_status s);

/* Configuration keys, in registry order. */
TRACKS_API size_t tracks_config_key_count(void);
TRACKS_API tracks_status tracks_config_key_info(size_t index, const char** name, const char** default_value,
                                                const char** doc);

TRACKS_API tracks_status tracks_config_new(tracks_config** out);
TRACKS_API tracks_status tracks_config_clone(const tracks_config* cfg, tracks_config** out);
TRACKS_API void tracks_config_free(tracks_config* cfg);
TRACKS_API tracks_status tracks_config_set(tracks_config* cfg, const char* key, const char* value);
TRACKS_API tracks_status tracks_config_get(const tracks_config* cfg, const char* key, const char** value);
/* key = value lines, '#' comments, "include <path>". */
TRACKS_API tracks_status tracks_config_load(tracks_config* cfg, const char* path);
TRACKS_API tracks_status tracks_config_validate(const tracks_config* cfg);
TRACKS_API uint64_t tracks_config_hash(const tracks_config* cfg);

/* Runs the simulation in memory. */
TRACKS_API tracks_status tracks_run(const tracks_config* cfg, tracks_result** out);
/* Runs and writes a run directory; `out` may be NULL. Nothing is written on
 * failure. */
TRACKS_API tracks_status tracks_run_to_dir(const tracks_config* cfg, const char* dir, int overwrite,
                                           tracks_result** out);
TRACKS_API tracks_status tracks_result_write(const tracks_result* res, const char* dir, int overwrite);
TRACKS_API void tracks_result_free(tracks_result* res);

TRACKS_API size_t tracks_result_flow_count(const tracks_result* res);
TRACKS_API tracks_status tracks_result_flow(const tracks_result* res, size_t index, tracks_flow_record* out);
TRACKS_API size_t tracks_result_recovery_count(const tracks_result* res);
TRACKS_API tracks_status tracks_result_recovery(const tracks_result* res, size_t index,
                                                tracks_recovery_event* out);
TRACKS_API tracks_status tracks_result_diagnostics(const tracks_result* res, size_t index,
                                                   tracks_flow_diagnostics* out);
TRACKS_API tracks_status tracks_result_shim_counters(const tracks_result* res, tracks_shim_counters* out);
TRACKS_API tracks_status tracks_result_summary(const tracks_result* res, tracks_run_summary* out);
/* Nearest-rank FCT percentile over completed flows of a class ("small",
 * "medium", "large", or NULL for all). TRACKS_ERR_ARGUMENT when none. */
TRACKS_API tracks_status tracks_result_fct_percentile(const tracks_result* res, const char* size_class, double p,
                                                      double* out);

/* One run per value of `key` under `dir`, plus dir/summary.csv. `failed`
 * (may be NULL) receives the number of failing points. */
TRACKS_API tracks_status tracks_sweep(const tracks_config* base, const char* key, const char* const* values,
                                      size_t n_values, const char* dir, int overwrite, unsigned workers,
                                      size_t* failed);
/* Rebuilds the derived summaries of a run directory from its CSVs. */
TRACKS_API tracks_status tracks_analyze(const char* dir);
/* $TRACKS_OUTPUT_ROOT or "runs". */
TRACKS_API const char* tracks_default_output_root(void);

/* Fluid model: ideal and timeout-inflated throughput (bits/s) of a B-bit
 * transfer among N flows on capacity C, n RTTs of tau plus n_prime RTTs of
 * tau_prime after a timeout of rto. */
TRACKS_API tracks_status tracks_fluid_throughput(double B, double N, double C, double n, double tau, double rto,
                                                 double n_prime, double tau_prime, double* rho_star,
                                                 double* rho);

#ifdef __cplusplus
}
#endif

#endif
