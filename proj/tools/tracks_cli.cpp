// Command-line front end. Talks to the simulator only through tracks.h.
#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "tracks.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int exit_code(tracks_status s) {
    switch (s) {
        case TRACKS_OK: return kExitOk;
        case TRACKS_ERR_CONFIG:
        case TRACKS_ERR_EXISTS:
        case TRACKS_ERR_ARGUMENT: return kExitConfig;
        default: return kExitRuntime;
    }
}

int report(tracks_status s) {
    if (s != TRACKS_OK) std::fprintf(stderr, "tracks: %s: %s\n", tracks_status_name(s), tracks_last_error());
    return exit_code(s);
}

struct ConfigHandle {
    tracks_config* p = nullptr;
    ConfigHandle() {
        if (tracks_config_new(&p) != TRACKS_OK) throw std::runtime_error(tracks_last_error());
    }
    ~ConfigHandle() { tracks_config_free(p); }
    ConfigHandle(const ConfigHandle&) = delete;
    ConfigHandle& operator=(const ConfigHandle&) = delete;
};

// Options shared by run and sweep: a config file, --set k=v, and one flag
// per configuration key.
struct ConfigOptions {
    std::vector<std::string> files;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", files, "config file(s), applied in order before any flag");
        app->add_option("--set", sets, "override key=value (repeatable)");
        const size_t n = tracks_config_key_count();
        for (size_t i = 0; i < n; ++i) {
            const char *name, *def, *doc;
            tracks_config_key_info(i, &name, &def, &doc);
            std::string dashed = name;
            for (auto& c : dashed) c = c == '_' ? '-' : c;
            std::string spec = "--" + std::string(name);
            if (dashed != name) spec += ",--" + dashed;
            app->add_option(spec, flags[name], std::string(doc) + " [" + def + "]")->group("Parameters");
        }
    }

    tracks_status apply(tracks_config* cfg, CLI::App* app) const {
        for (const auto& f : files) {
            if (auto s = tracks_config_load(cfg, f.c_str()); s != TRACKS_OK) return s;
        }
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "tracks: --set expects key=value, got '%s'\n", kv.c_str());
                return TRACKS_ERR_CONFIG;
            }
            const auto k = kv.substr(0, eq), v = kv.substr(eq + 1);
            if (auto s = tracks_config_set(cfg, k.c_str(), v.c_str()); s != TRACKS_OK) return s;
        }
        for (const auto& [k, v] : flags) {
            if (app->get_option("--" + k)->count() == 0) continue;
            if (auto s = tracks_config_set(cfg, k.c_str(), v.c_str()); s != TRACKS_OK) return s;
        }
        return TRACKS_OK;
    }
};

std::string get(tracks_config* cfg, const char* key) {
    const char* v = "";
    tracks_config_get(cfg, key, &v);
    return v;
}

std::string default_dir(tracks_config* cfg, const std::string& stem) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, tracks_config_hash(cfg));
    return std::string(tracks_default_output_root()) + "/" + stem + "-" + std::string(hash, 8);
}

void print_summary(tracks_result* res, const std::string& dir) {
    tracks_run_summary sum;
    tracks_result_summary(res, &sum);
    tracks_shim_counters sc;
    tracks_result_shim_counters(res, &sc);
    size_t n = tracks_result_flow_count(res), done = 0, small_missed = 0;
    uint64_t rto = 0, rack = 0;
    for (size_t i = 0; i < n; ++i) {
        tracks_flow_record f;
        tracks_result_flow(res, i, &f);
        done += f.completed;
        small_missed += f.deadline_missed;
        rto += f.rto_events;
        rack += f.rack_assisted_frr_events;
    }
    std::printf("flows %zu (completed %zu), deadline misses %zu, rto events %" PRIu64
                ", shim-assisted frr %" PRIu64 ", spoofed acks %" PRIu64 "\n",
                n, done, small_missed, rto, rack, sc.spoofed_acks_sent);
    double p95;
    if (tracks_result_fct_percentile(res, "small", 95, &p95) == TRACKS_OK)
        std::printf("small-flow p95 fct %.0f us\n", p95);
    std::printf("simulated %" PRIu64 " us, %" PRIu64 " events, schedule hash %016" PRIx64 "\n", sum.end_time_us,
                sum.events_dispatched, sum.schedule_hash);
    std::printf("output: %s\n", dir.c_str());
}

// "a:b:step" -> values from a to b inclusive.
bool expand_range(const std::string& r, std::vector<std::string>& out) {
    double a, b, step;
    char tail;
    if (std::sscanf(r.c_str(), "%lf:%lf:%lf%c", &a, &b, &step, &tail) != 3 || !(step > 0)) return false;
    const auto n = static_cast<long>((b - a) / step + 1e-9);
    for (long i = 0; i <= n; ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", a + static_cast<double>(i) * step);
        out.emplace_back(buf);
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Packet-level data-center TCP simulator with the T-RACKs loss-recovery shim"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tracks_version()));

    auto* run = app.add_subcommand("run", "run one simulation and write a run directory");
    ConfigOptions run_opts;
    std::string run_out;
    bool run_overwrite = false;
    run_opts.attach(run);
    run->add_option("-o,--out", run_out, "output directory (default: $TRACKS_OUTPUT_ROOT/run-..., root defaults to ./runs)");
    run->add_flag("--overwrite", run_overwrite, "replace an existing output directory");

    auto* sweep = app.add_subcommand("sweep", "one run per value of a parameter, plus summary.csv");
    ConfigOptions sweep_opts;
    std::string sweep_key, sweep_range, sweep_out;
    std::vector<std::string> sweep_values;
    unsigned workers = 1;
    bool sweep_overwrite = false;
    sweep_opts.attach(sweep);
    sweep->add_option("-k,--key", sweep_key, "parameter to vary")->required();
    sweep->add_option("-v,--values", sweep_values, "values (comma separated or repeated)")->delimiter(',');
    sweep->add_option("-r,--range", sweep_range, "numeric values start:stop:step, stop inclusive");
    sweep->add_option("-j,--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);
    sweep->add_option("-o,--out", sweep_out, "sweep directory (default under $TRACKS_OUTPUT_ROOT)");
    sweep->add_flag("--overwrite", sweep_overwrite, "replace existing output directories");

    auto* analyze = app.add_subcommand("analyze", "re-derive summaries from the CSVs of existing run directories");
    std::vector<std::string> analyze_dirs;
    analyze->add_option("dirs", analyze_dirs, "run directories")->required();

    auto* keys = app.add_subcommand("keys", "list configuration keys with defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (*keys) {
        for (size_t i = 0; i < tracks_config_key_count(); ++i) {
            const char *name, *def, *doc;
            tracks_config_key_info(i, &name, &def, &doc);
            std::printf("%-22s %-14s %s\n", name, def, doc);
        }
        return kExitOk;
    }

    if (*analyze) {
        for (const auto& d : analyze_dirs) {
            if (auto s = tracks_analyze(d.c_str()); s != TRACKS_OK) return report(s);
            std::printf("analyzed %s\n", d.c_str());
        }
        return kExitOk;
    }

    ConfigHandle cfg;
    if (*run) {
        if (auto s = run_opts.apply(cfg.p, run); s != TRACKS_OK) return report(s);
        if (auto s = tracks_config_validate(cfg.p); s != TRACKS_OK) return report(s);
        if (run_out.empty())
            run_out = default_dir(cfg.p, "run-" + get(cfg.p, "scenario") + "-seed" + get(cfg.p, "seed"));
        tracks_result* res = nullptr;
        const auto s = tracks_run_to_dir(cfg.p, run_out.c_str(), run_overwrite ? 1 : 0, &res);
        if (s != TRACKS_OK) return report(s);
        print_summary(res, run_out);
        tracks_result_free(res);
        return kExitOk;
    }

    if (auto s = sweep_opts.apply(cfg.p, sweep); s != TRACKS_OK) return report(s);
    if (!sweep_range.empty() && !expand_range(sweep_range, sweep_values)) {
        std::fprintf(stderr, "tracks: --range expects start:stop:step with step > 0\n");
        return kExitConfig;
    }
    if (sweep_values.empty()) {
        std::printf("empty sweep axis, nothing to do\n");
        return kExitOk;
    }
    if (sweep_out.empty()) sweep_out = default_dir(cfg.p, "sweep-" + sweep_key);
    std::vector<const char*> vals;
    for (const auto& v : sweep_values) vals.push_back(v.c_str());
    size_t failed = 0;
    const auto s = tracks_sweep(cfg.p, sweep_key.c_str(), vals.data(), vals.size(), sweep_out.c_str(),
                                sweep_overwrite ? 1 : 0, workers, &failed);
    if (s != TRACKS_OK) return report(s);
    std::printf("%zu points, %zu failed, summary: %s/summary.csv\n", vals.size(), failed, sweep_out.c_str());
    return failed ? kExitRuntime : kExitOk;
}
