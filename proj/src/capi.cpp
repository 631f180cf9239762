#include "tracks.h"

#include <exception>
#include <string>

#include "tracks/config.hpp"
#include "tracks/errors.hpp"
#include "tracks/harness.hpp"
#include "tracks/metrics.hpp"

struct tracks_config {
    tracks::Config cfg;
};

struct tracks_result {
    tracks::Config cfg;
    tracks::RunResult run;
};

namespace {

thread_local std::string g_last_error;

tracks_status fail(tracks_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// Maps exceptions escaping the library onto status codes.
template <class F>
tracks_status guarded(F&& f) {
    try {
        f();
        return TRACKS_OK;
    } catch (const tracks::ConfigError& e) {
        return fail(TRACKS_ERR_CONFIG, e.what());
    } catch (const tracks::OutputExistsError& e) {
        return fail(TRACKS_ERR_EXISTS, e.what());
    } catch (const std::domain_error& e) {
        return fail(TRACKS_ERR_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(TRACKS_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(TRACKS_ERR_RUNTIME, "unknown error");
    }
}

std::optional<tracks::SizeClass> class_arg(const char* s) {
    if (!s) return std::nullopt;
    auto c = tracks::parse_size_class(s);
    if (!c) throw tracks::ConfigError(std::string("unknown size class '") + s + "'");
    return c;
}

}  // namespace

extern "C" {

const char* tracks_version(void) { return "1.0.0"; }

const char* tracks_last_error(void) { return g_last_error.c_str(); }

const char* tracks_status_name(tracks_status s) {
    switch (s) {
        case TRACKS_OK: return "ok";
        case TRACKS_ERR_CONFIG: return "config_error";
        case TRACKS_ERR_RUNTIME: return "runtime_error";
        case TRACKS_ERR_EXISTS: return "output_exists";
        case TRACKS_ERR_ARGUMENT: return "bad_argument";
    }
    return "unknown";
}

size_t tracks_config_key_count(void) { return tracks::config_keys().size(); }

tracks_status tracks_config_key_info(size_t index, const char** name, const char** default_value, const char** doc) {
    const auto& keys = tracks::config_keys();
    if (index >= keys.size()) return fail(TRACKS_ERR_ARGUMENT, "key index out of range");
    if (name) *name = keys[index].name;
    if (default_value) *default_value = keys[index].default_value;
    if (doc) *doc = keys[index].doc;
    return TRACKS_OK;
}

tracks_status tracks_config_new(tracks_config** out) {
    if (!out) return fail(TRACKS_ERR_ARGUMENT, "null output pointer");
    return guarded([&] { *out = new tracks_config{}; });
}

tracks_status tracks_config_clone(const tracks_config* cfg, tracks_config** out) {
    if (!cfg || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] { *out = new tracks_config{cfg->cfg}; });
}

void tracks_config_free(tracks_config* cfg) { delete cfg; }

tracks_status tracks_config_set(tracks_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] { cfg->cfg.set(key, value); });
}

tracks_status tracks_config_get(const tracks_config* cfg, const char* key, const char** value) {
    if (!cfg || !key || !value) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] { *value = cfg->cfg.get(key).c_str(); });
}

tracks_status tracks_config_load(tracks_config* cfg, const char* path) {
    if (!cfg || !path) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] { cfg->cfg.load_file(path); });
}

tracks_status tracks_config_validate(const tracks_config* cfg) {
    if (!cfg) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const auto ec = cfg->cfg.to_experiment();
        // Topology and schedule parameters are only checked once built.
        const auto topo = tracks::build_topology(ec);
        (void)tracks::build_schedule(ec, *topo);
    });
}

uint64_t tracks_config_hash(const tracks_config* cfg) { return cfg ? cfg->cfg.hash() : 0; }

tracks_status tracks_run(const tracks_config* cfg, tracks_result** out) {
    if (!cfg || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto r = tracks::run_experiment(cfg->cfg.to_experiment());
        *out = new tracks_result{cfg->cfg, std::move(r)};
    });
}

tracks_status tracks_run_to_dir(const tracks_config* cfg, const char* dir, int overwrite, tracks_result** out) {
    if (!cfg || !dir) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    if (out) *out = nullptr;
    return guarded([&] {
        auto r = tracks::run_to_dir(cfg->cfg, dir, overwrite != 0);
        if (out) *out = new tracks_result{cfg->cfg, std::move(r)};
    });
}

tracks_status tracks_result_write(const tracks_result* res, const char* dir, int overwrite) {
    if (!res || !dir) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] { tracks::write_run_dir(dir, res->cfg, res->run, overwrite != 0); });
}

void tracks_result_free(tracks_result* res) { delete res; }

size_t tracks_result_flow_count(const tracks_result* res) { return res ? res->run.flows.size() : 0; }

tracks_status tracks_result_flow(const tracks_result* res, size_t index, tracks_flow_record* out) {
    if (!res || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    if (index >= res->run.flows.size()) return fail(TRACKS_ERR_ARGUMENT, "flow index out of range");
    const auto& f = res->run.flows[index];
    *out = tracks_flow_record{};
    out->flow_id = f.flow_id;
    out->src = f.src;
    out->dst = f.dst;
    out->size_bytes = f.size_bytes;
    out->size_class = tracks::to_string(f.size_class);
    out->start_us = f.start;
    out->completed = f.completed() ? 1 : 0;
    out->end_us = f.end.value_or(0);
    out->fct_us = f.fct().value_or(0);
    out->rto_events = f.rto_events;
    out->frr_events = f.frr_events;
    out->rack_assisted_frr_events = f.rack_assisted_frr_events;
    out->spoofed_acks_received = f.spoofed_acks_received;
    out->deadline_missed = f.deadline_missed ? 1 : 0;
    out->round = f.round;
    return TRACKS_OK;
}

size_t tracks_result_recovery_count(const tracks_result* res) { return res ? res->run.recoveries.size() : 0; }

tracks_status tracks_result_recovery(const tracks_result* res, size_t index, tracks_recovery_event* out) {
    if (!res || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    if (index >= res->run.recoveries.size()) return fail(TRACKS_ERR_ARGUMENT, "recovery index out of range");
    const auto& e = res->run.recoveries[index];
    out->flow_id = e.flow_id;
    out->kind = tracks::to_string(e.kind);
    out->cwnd_mss = e.cwnd_mss;
    out->loss_index_fraction = e.loss_index_fraction;
    out->burst_fraction = e.burst_fraction;
    out->recovery_duration_us = e.recovery_duration;
    return TRACKS_OK;
}

tracks_status tracks_result_diagnostics(const tracks_result* res, size_t index, tracks_flow_diagnostics* out) {
    if (!res || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    if (index >= res->run.diagnostics.size()) return fail(TRACKS_ERR_ARGUMENT, "flow index out of range");
    const auto& d = res->run.diagnostics[index];
    out->flow_id = d.flow_id;
    out->delivered_bytes = d.delivered_bytes;
    out->stream_intact = d.stream_intact ? 1 : 0;
    out->cwnd_trace_hash = d.cwnd_trace_hash;
    out->retransmissions = d.retransmissions;
    return TRACKS_OK;
}

tracks_status tracks_result_shim_counters(const tracks_result* res, tracks_shim_counters* out) {
    if (!res || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    const auto& c = res->run.shim;
    out->spoofed_acks_sent = c.spoofed_acks_sent;
    out->dupacks_dropped = c.dupacks_dropped;
    out->episodes_opened = c.episodes_opened;
    out->episodes_stopped_at_rtomin = c.episodes_stopped_at_rtomin;
    out->flows_tracked = c.flows_tracked;
    out->flows_marked_long_lived = c.flows_marked_long_lived;
    out->untracked_flows = c.untracked_flows;
    return TRACKS_OK;
}

tracks_status tracks_result_summary(const tracks_result* res, tracks_run_summary* out) {
    if (!res || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    const auto& r = res->run;
    out->schedule_hash = r.schedule_hash;
    out->config_hash = res->cfg.hash();
    out->end_time_us = r.end_time;
    out->events_dispatched = r.events_dispatched;
    out->packets_dropped = r.packets_dropped;
    out->packets_marked = r.packets_marked;
    out->injected_drops = r.injected_drops;
    out->base_rtt_us = r.base_rtt_us;
    return TRACKS_OK;
}

tracks_status tracks_result_fct_percentile(const tracks_result* res, const char* size_class, double p, double* out) {
    if (!res || !out) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    if (!(p > 0 && p <= 100)) return fail(TRACKS_ERR_ARGUMENT, "percentile must lie in (0, 100]");
    std::vector<std::pair<double, double>> v;
    const auto st = guarded([&] { v = tracks::fct_percentiles(res->run.flows, class_arg(size_class), {p}); });
    if (st != TRACKS_OK) return st;
    if (v.empty()) return fail(TRACKS_ERR_ARGUMENT, "no completed flows in that class");
    *out = v[0].second;
    return TRACKS_OK;
}

tracks_status tracks_sweep(const tracks_config* base, const char* key, const char* const* values, size_t n_values,
                           const char* dir, int overwrite, unsigned workers, size_t* failed) {
    if (!base || !key || !dir || (n_values && !values)) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    if (failed) *failed = 0;
    return guarded([&] {
        std::vector<std::string> vals;
        for (size_t i = 0; i < n_values; ++i) {
            if (!values[i]) throw tracks::ConfigError("null sweep value");
            vals.emplace_back(values[i]);
        }
        const auto pts = tracks::run_sweep(base->cfg, key, vals, dir, overwrite != 0, workers);
        if (failed) {
            for (const auto& p : pts) *failed += p.ok ? 0 : 1;
        }
    });
}

tracks_status tracks_analyze(const char* dir) {
    if (!dir) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] { tracks::analyze_run_dir(dir); });
}

const char* tracks_default_output_root(void) {
    thread_local std::string root;
    root = tracks::default_output_root();
    return root.c_str();
}

tracks_status tracks_fluid_throughput(double B, double N, double C, double n, double tau, double rto, double n_prime,
                                      double tau_prime, double* rho_star, double* rho) {
    if (!rho_star || !rho) return fail(TRACKS_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const auto f = tracks::fluid_throughput(B, N, C, n, tau, rto, n_prime, tau_prime);
        *rho_star = f.rho_star;
        *rho = f.rho;
    });
}

}  // extern "C"
