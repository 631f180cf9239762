#include "tracks/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "tracks/errors.hpp"
#include "tracks/metrics.hpp"

namespace fs = std::filesystem;

namespace tracks {

namespace {

std::atomic<std::uint64_t> g_tmp_counter{0};

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

template <class F>
std::string render(F&& f) {
    std::ostringstream os;
    f(os);
    return os.str();
}

// class,flows,completed,mean_fct_us,p50_fct_us,p95_fct_us,p99_fct_us,...
struct ClassStats {
    std::string cls;
    std::size_t flows = 0, completed = 0, misses = 0;
    std::uint64_t rto = 0, frr = 0, rack_frr = 0;
    std::optional<double> mean, p50, p95, p99;
};

std::vector<ClassStats> class_stats(const std::vector<FlowRecord>& rows) {
    std::vector<ClassStats> out;
    const std::vector<std::pair<std::string, std::optional<SizeClass>>> classes = {
        {"small", SizeClass::Small}, {"medium", SizeClass::Medium}, {"large", SizeClass::Large}, {"all", std::nullopt}};
    for (const auto& [name, cls] : classes) {
        ClassStats s;
        s.cls = name;
        for (const auto& r : rows) {
            if (cls && r.size_class != *cls) continue;
            ++s.flows;
            if (r.completed()) ++s.completed;
            if (r.deadline_missed) ++s.misses;
            s.rto += r.rto_events;
            s.frr += r.frr_events;
            s.rack_frr += r.rack_assisted_frr_events;
        }
        s.mean = mean_fct(rows, cls);
        const auto ps = fct_percentiles(rows, cls, {50, 95, 99});
        if (!ps.empty()) {
            s.p50 = ps[0].second;
            s.p95 = ps[1].second;
            s.p99 = ps[2].second;
        }
        out.push_back(s);
    }
    return out;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void write_summary_csv(std::ostream& os, const std::vector<FlowRecord>& rows) {
    os << "class,flows,completed,mean_fct_us,p50_fct_us,p95_fct_us,p99_fct_us,rto_events,frr_events,"
          "rack_assisted_frr_events,deadline_misses\n";
    for (const auto& s : class_stats(rows)) {
        os << s.cls << ',' << s.flows << ',' << s.completed << ',' << opt(s.mean) << ',' << opt(s.p50) << ','
           << opt(s.p95) << ',' << opt(s.p99) << ',' << s.rto << ',' << s.frr << ',' << s.rack_frr << ','
           << s.misses << '\n';
    }
}

void write_derived(const fs::path& dir, const std::vector<FlowRecord>& flows,
                   const std::vector<RecoveryEvent>& recoveries) {
    const auto rs = classify_recovery(recoveries);
    write_file(dir / "summary.csv", render([&](std::ostream& os) { write_summary_csv(os, flows); }));
    write_file(dir / "fct_cdf.csv", render([&](std::ostream& os) { write_fct_cdf(os, flows); }));
    write_file(dir / "rounds.csv", render([&](std::ostream& os) { write_round_summary(os, flows); }));
    write_file(dir / "recovery_histograms.csv",
               render([&](std::ostream& os) { write_recovery_histograms(os, rs); }));
    write_file(dir / "cwnd_cdf.csv", render([&](std::ostream& os) { write_cwnd_cdf(os, rs); }));
}

std::string shim_counters_text(const ShimCounters& c) {
    std::ostringstream os;
    os << "spoofed_acks_sent=" << c.spoofed_acks_sent << '\n'
       << "dupacks_dropped=" << c.dupacks_dropped << '\n'
       << "episodes_opened=" << c.episodes_opened << '\n'
       << "episodes_stopped_at_rtomin=" << c.episodes_stopped_at_rtomin << '\n'
       << "flows_tracked=" << c.flows_tracked << '\n'
       << "flows_marked_long_lived=" << c.flows_marked_long_lived << '\n'
       << "untracked_flows=" << c.untracked_flows << '\n';
    return os.str();
}

std::string meta_text(const Config& cfg, const RunResult& r) {
    std::ostringstream os;
    os << "seed=" << cfg.get("seed") << '\n'
       << "config_hash=" << hex64(cfg.hash()) << '\n'
       << "schedule_hash=" << hex64(r.schedule_hash) << '\n'
       << "topology_description=" << r.topology_description << '\n'
       << "base_rtt_us=" << format_double(r.base_rtt_us) << '\n'
       << "end_time_us=" << r.end_time << '\n'
       << "events_dispatched=" << r.events_dispatched << '\n'
       << "packets_dropped=" << r.packets_dropped << '\n'
       << "packets_marked=" << r.packets_marked << '\n'
       << "injected_drops=" << r.injected_drops << '\n'
       << "flows=" << r.flows.size() << '\n';
    if (cfg.get("topology") != "dumbbell" && cfg.get("scenario") == "poisson")
        os << "note=leaf buffers are the intra-rack bandwidth-delay product rounded up to whole packets "
              "unless leaf_buffer_pkts is set; the value used is buffer_pkts in topology_description\n";
    for (const auto& [k, v] : cfg.items()) os << "param." << k << '=' << v << '\n';
    return os.str();
}

std::map<std::string, std::string> read_kv(const fs::path& p) {
    std::map<std::string, std::string> kv;
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

fs::path temp_sibling(const fs::path& dir) {
    const auto parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
    return parent / ("." + dir.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                     std::to_string(g_tmp_counter.fetch_add(1)));
}

// Moves a fully written temp directory into place.
void commit_dir(const fs::path& tmp, const fs::path& dir, bool overwrite) {
    if (fs::exists(dir)) {
        if (!overwrite) {
            fs::remove_all(tmp);
            throw OutputExistsError("output directory " + dir.string() + " exists (use --overwrite)");
        }
        const auto trash = temp_sibling(dir);
        fs::rename(dir, trash);
        fs::rename(tmp, dir);
        fs::remove_all(trash);
        return;
    }
    fs::rename(tmp, dir);
}

std::string point_dir_name(std::size_t i, const std::string& key, const std::string& value) {
    std::string v;
    for (char c : value) v += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
    char idx[16];
    std::snprintf(idx, sizeof idx, "p%02zu_", i);
    return idx + key + "=" + v;
}

}  // namespace

std::string default_output_root() {
    const char* env = std::getenv("TRACKS_OUTPUT_ROOT");
    return env && *env ? env : "runs";
}

void write_run_dir(const std::string& dir_s, const Config& cfg, const RunResult& r, bool overwrite) {
    const fs::path dir(dir_s);
    if (dir.filename().empty()) throw ConfigError("output directory path must name a directory");
    if (fs::exists(dir) && !overwrite)
        throw OutputExistsError("output directory " + dir.string() + " exists (use --overwrite)");
    if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
    const auto tmp = temp_sibling(dir);
    fs::create_directory(tmp);
    try {
        write_file(tmp / "flows.csv", render([&](std::ostream& os) { write_flow_csv(os, r.flows); }));
        write_file(tmp / "recoveries.csv", render([&](std::ostream& os) { write_recovery_csv(os, r.recoveries); }));
        write_file(tmp / "shim_counters.txt", shim_counters_text(r.shim));
        write_file(tmp / "meta.txt", meta_text(cfg, r));
        write_derived(tmp, r.flows, r.recoveries);
    } catch (...) {
        fs::remove_all(tmp);
        throw;
    }
    commit_dir(tmp, dir, overwrite);
}

RunResult run_to_dir(const Config& cfg, const std::string& dir, bool overwrite) {
    const auto ec = cfg.to_experiment();
    if (fs::exists(dir) && !overwrite)
        throw OutputExistsError("output directory " + dir + " exists (use --overwrite)");
    auto r = run_experiment(ec);
    write_run_dir(dir, cfg, r, overwrite);
    return r;
}

void analyze_run_dir(const std::string& dir_s) {
    const fs::path dir(dir_s);
    std::vector<FlowRecord> flows;
    std::vector<RecoveryEvent> recoveries;
    {
        std::ifstream in(dir / "flows.csv");
        if (!in) throw ConfigError("cannot read " + (dir / "flows.csv").string());
        flows = read_flow_csv(in, (dir / "flows.csv").string());
    }
    {
        std::ifstream in(dir / "recoveries.csv");
        if (!in) throw ConfigError("cannot read " + (dir / "recoveries.csv").string());
        recoveries = read_recovery_csv(in, (dir / "recoveries.csv").string());
    }
    // Rounds are not stored per flow; incast round r starts at r * interval.
    if (fs::exists(dir / "meta.txt")) {
        const auto kv = read_kv(dir / "meta.txt");
        const auto sc = kv.find("param.scenario");
        const auto iv = kv.find("param.round_interval_us");
        if (sc != kv.end() && iv != kv.end() && (sc->second == "case1" || sc->second == "case2")) {
            const auto interval = parse_u64("round_interval_us", iv->second);
            if (interval > 0) {
                for (auto& f : flows) f.round = static_cast<std::uint32_t>(f.start / interval);
            }
        }
    }
    write_derived(dir, flows, recoveries);
}

std::vector<SweepPointStatus> run_sweep(const Config& base, const std::string& key,
                                        const std::vector<std::string>& values, const std::string& dir_s,
                                        bool overwrite, unsigned workers) {
    std::vector<SweepPointStatus> pts;
    if (values.empty()) return pts;
    if (!find_config_key(key)) throw ConfigError("unknown sweep key '" + key + "'");
    const fs::path dir(dir_s);
    if (fs::exists(dir / "summary.csv") && !overwrite)
        throw OutputExistsError("sweep directory " + dir.string() + " exists (use --overwrite)");
    fs::create_directories(dir);

    pts.resize(values.size());
    std::vector<std::vector<FlowRecord>> results(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        pts[i].value = values[i];
        pts[i].dir = (dir / point_dir_name(i, key, values[i])).string();
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < values.size();) {
            try {
                Config c = base;
                c.set(key, values[i]);
                results[i] = run_to_dir(c, pts[i].dir, overwrite).flows;
                pts[i].ok = true;
            } catch (const ConfigError& e) {
                pts[i].error = std::string("config_error: ") + e.what();
            } catch (const std::exception& e) {
                pts[i].error = std::string("runtime_error: ") + e.what();
            }
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(values.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream os;
    os << "point,class,flows,mean_fct_us,p95_fct_us,rto_events,deadline_misses,status\n";
    std::string errors;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto point = key + "=" + pts[i].value;
        if (!pts[i].ok) {
            os << point << ",,,,,,,failed\n";
            errors += point + ": " + pts[i].error + "\n";
            continue;
        }
        for (const auto& s : class_stats(results[i])) {
            if (s.flows == 0 && s.cls != "all") continue;
            os << point << ',' << s.cls << ',' << s.flows << ',' << opt(s.mean) << ',' << opt(s.p95) << ','
               << s.rto << ',' << s.misses << ",ok\n";
        }
    }
    write_file(dir / "summary.csv", os.str());
    if (!errors.empty()) write_file(dir / "errors.txt", errors);
    return pts;
}

}  // namespace tracks
