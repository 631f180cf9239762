#include "tracks/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "tracks/errors.hpp"

#ifndef TRACKS_DEFAULT_DATA_DIR
#define TRACKS_DEFAULT_DATA_DIR "data/workloads"
#endif

namespace tracks {

namespace {

const std::vector<ConfigKey> kKeys = {
    {"scenario", "case1", "case1 | case2 | poisson | single"},
    {"flows", "20", "small flows per incast round"},
    {"rounds", "5", "incast rounds"},
    {"round_interval_us", "3000000", "time between incast rounds"},
    {"small_flow_bytes", "14600", "bytes per incast flow"},
    {"single_bytes", "2920", "flow size for the single scenario"},
    {"topology", "auto", "auto | dumbbell | leafspine (auto: leafspine for poisson, else dumbbell)"},
    {"link_rate_gbps", "1", "dumbbell host and bottleneck link rate"},
    {"rtt_us", "100", "dumbbell unloaded round-trip time"},
    {"buffer_pkts", "100", "dumbbell switch buffer per port, packets"},
    {"leaves", "9", "leaf switches"},
    {"spines", "4", "spine switches"},
    {"hosts_per_leaf", "4", "hosts under each leaf"},
    {"host_rate_gbps", "10", "leaf-spine host link rate"},
    {"oversubscription", "5", "host bandwidth into a leaf / leaf uplink bandwidth"},
    {"hop_delay_us", "50", "leaf-spine per-hop propagation delay"},
    {"leaf_buffer_pkts", "0", "leaf-spine buffer per port (0: intra-rack bandwidth-delay product)"},
    {"host_buffer_pkts", "10000", "host NIC queue, packets"},
    {"frame_overhead_bytes", "0", "wire bytes added to every frame"},
    {"tcp", "newreno", "newreno | newreno-ecn | dctcp"},
    {"sack", "off", "SACK option"},
    {"timestamps", "on", "timestamp option"},
    {"delayed_ack", "off", "ACK every second segment, 40 ms timeout"},
    {"init_cwnd", "10", "initial window, segments"},
    {"mss", "1460", "maximum segment size, bytes"},
    {"rto_min_us", "200000", "retransmission timeout floor"},
    {"rto_init_us", "200000", "retransmission timeout before the first RTT sample"},
    {"dupack_threshold", "3", "duplicate ACKs that trigger fast retransmit"},
    {"dctcp_gain", "0.0625", "DCTCP estimator gain g"},
    {"aqm", "droptail", "droptail | droprand | red | dctcp"},
    {"red_min_th", "20", "RED minimum threshold, packets"},
    {"red_max_th", "80", "RED maximum threshold, packets"},
    {"red_max_p", "0.1", "RED marking probability at max_th"},
    {"red_wq", "0.002", "RED queue averaging weight"},
    {"dctcp_k", "0", "DCTCP marking threshold (0: 20 below 10 Gb/s, 65 at 10 Gb/s and above)"},
    {"shim", "on", "loss-recovery shim on the sending hosts"},
    {"alpha", "10", "RTTs of silence before spoofed ACKs start"},
    {"gamma", "inf", "acked bytes after which a flow stops being tracked (inf: never)"},
    {"phi", "3", "duplicate ACK threshold assumed for senders"},
    {"shim_rto_min_us", "200000", "silence after which the shim gives up and leaves recovery to the RTO"},
    {"tick_us", "1000", "shim timer period"},
    {"inactivity_us", "1000000", "idle time after which a flow entry is dropped"},
    {"default_rtt_us", "0", "shim RTT before the first sample (0: topology base RTT)"},
    {"flow_table_size", "4096", "shim flow table capacity"},
    {"workload", "websearch", "websearch | datamining | educational | privatedc | path to a CDF file"},
    {"workload_dir", TRACKS_DEFAULT_DATA_DIR, "directory holding the named workload CDFs"},
    {"load", "0.7", "offered load as a fraction of bisection capacity"},
    {"pattern", "all_to_all", "all_to_all | one_to_all"},
    {"arrival_window_us", "200000", "Poisson arrivals are generated in [0, window)"},
    {"loss", "none", "none | flow_tail | flow_head (drop first transmission of each flow's last / first segment)"},
    {"seed", "1", "master random seed"},
    {"duration_us", "15000000", "simulated time limit"},
    {"deadline_us", "200000", "small-flow deadline"},
    {"stop_when_done", "on", "end the run once every finite flow has completed"},
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
    const auto x = parse_u64(key, v);
    if (x > UINT32_MAX) throw ConfigError(key + ": value out of range");
    return static_cast<std::uint32_t>(x);
}

std::uint64_t gbps(const std::string& key, const std::string& v) {
    const double g = parse_f64(key, v);
    if (!(g > 0)) throw ConfigError(key + " must be positive");
    return static_cast<std::uint64_t>(std::llround(g * 1e9));
}

}  // namespace

const std::vector<ConfigKey>& config_keys() { return kKeys; }

const ConfigKey* find_config_key(const std::string& name) {
    for (const auto& k : kKeys) {
        if (name == k.name) return &k;
    }
    return nullptr;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

double parse_f64(const std::string& key, const std::string& v) {
    if (v.empty()) throw ConfigError(key + ": expected a number");
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(v.c_str(), &end);
    if (errno != 0 || end != v.c_str() + v.size() || !std::isfinite(x))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

Config::Config() {
    for (const auto& k : kKeys) values_.emplace_back(k.name, k.default_value);
}

void Config::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : values_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

const std::string& Config::get(const std::string& key) const {
    for (const auto& [k, v] : values_) {
        if (k == key) return v;
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

void Config::load_file(const std::string& path) { load_file(path, 0); }

void Config::load_file(const std::string& path, int depth) {
    if (depth > 16) throw ConfigError(path + ": include nesting too deep");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    const auto dir = std::filesystem::path(path).parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (line.rfind("include", 0) == 0 && (line.size() == 7 || line[7] == ' ' || line[7] == '\t')) {
            const auto target = trim(line.substr(7));
            if (target.empty()) throw ConfigError(where + ": include needs a path");
            const auto p = std::filesystem::path(target);
            load_file((p.is_absolute() ? p : dir / p).string(), depth + 1);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        try {
            set(key, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

std::uint64_t Config::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : values_) {
        if (k == "workload_dir") continue;  // location only, not a parameter
        h = fnv1a64(k + "=" + v + "\n", h);
    }
    return h;
}

ExperimentConfig Config::to_experiment() const {
    ExperimentConfig c;
    const auto& g = [this](const char* k) -> const std::string& { return get(k); };

    const auto& sc = g("scenario");
    if (sc == "case1") {
        c.scenario = ScenarioKind::Case1;
    } else if (sc == "case2") {
        c.scenario = ScenarioKind::Case2;
    } else if (sc == "poisson") {
        c.scenario = ScenarioKind::Poisson;
    } else if (sc == "single") {
        c.scenario = ScenarioKind::Single;
    } else {
        throw ConfigError("scenario: unknown value '" + sc + "'");
    }

    const auto& topo = g("topology");
    if (topo == "auto") {
        c.topology = c.scenario == ScenarioKind::Poisson ? TopologyKind::LeafSpine : TopologyKind::Dumbbell;
    } else if (topo == "dumbbell") {
        c.topology = TopologyKind::Dumbbell;
    } else if (topo == "leafspine") {
        c.topology = TopologyKind::LeafSpine;
    } else {
        throw ConfigError("topology: unknown value '" + topo + "'");
    }
    if (c.scenario == ScenarioKind::Poisson && c.topology != TopologyKind::LeafSpine)
        throw ConfigError("the poisson scenario runs on the leafspine topology");
    if (c.scenario != ScenarioKind::Poisson && c.topology != TopologyKind::Dumbbell)
        throw ConfigError("scenario " + sc + " runs on the dumbbell topology");

    c.incast.n_small = parse_u32("flows", g("flows"));
    if (c.incast.n_small == 0) throw ConfigError("flows must be positive");
    c.incast.rounds = parse_u32("rounds", g("rounds"));
    c.incast.round_interval = parse_u64("round_interval_us", g("round_interval_us"));
    c.incast.small_bytes = parse_u64("small_flow_bytes", g("small_flow_bytes"));
    c.incast.with_large = c.scenario == ScenarioKind::Case2;
    c.single_bytes = parse_u64("single_bytes", g("single_bytes"));

    c.dumbbell.host_rate_bps = gbps("link_rate_gbps", g("link_rate_gbps"));
    c.dumbbell.bottleneck_rate_bps = c.dumbbell.host_rate_bps;
    c.dumbbell.rtt_us = parse_u64("rtt_us", g("rtt_us"));
    if (c.dumbbell.rtt_us == 0) throw ConfigError("rtt_us must be positive");
    c.dumbbell.buffer_pkts = parse_u32("buffer_pkts", g("buffer_pkts"));
    if (c.dumbbell.buffer_pkts == 0) throw ConfigError("buffer_pkts must be positive");
    c.dumbbell.host_buffer_pkts = parse_u32("host_buffer_pkts", g("host_buffer_pkts"));
    if (c.dumbbell.host_buffer_pkts == 0) throw ConfigError("host_buffer_pkts must be positive");
    // One data frame at the bottleneck rate.
    c.incast.mean_gap_us = (kDefaultMss + kHeaderBytes) * 8.0 * 1e6 / static_cast<double>(c.dumbbell.bottleneck_rate_bps);

    c.leafspine.n_leaf = parse_u32("leaves", g("leaves"));
    c.leafspine.n_spine = parse_u32("spines", g("spines"));
    c.leafspine.hosts_per_leaf = parse_u32("hosts_per_leaf", g("hosts_per_leaf"));
    c.leafspine.host_rate_bps = gbps("host_rate_gbps", g("host_rate_gbps"));
    c.leafspine.oversubscription = parse_f64("oversubscription", g("oversubscription"));
    c.leafspine.hop_delay_us = parse_u64("hop_delay_us", g("hop_delay_us"));
    c.leafspine.buffer_pkts = parse_u32("leaf_buffer_pkts", g("leaf_buffer_pkts"));
    c.leafspine.host_buffer_pkts = c.dumbbell.host_buffer_pkts;
    c.frame_overhead = parse_u32("frame_overhead_bytes", g("frame_overhead_bytes"));

    const auto& tcp = g("tcp");
    if (tcp == "newreno") {
        c.tcp.variant = TcpVariant::NewReno;
    } else if (tcp == "newreno-ecn" || tcp == "ecn") {
        c.tcp.variant = TcpVariant::NewRenoEcn;
    } else if (tcp == "dctcp") {
        c.tcp.variant = TcpVariant::Dctcp;
    } else {
        throw ConfigError("tcp: unknown value '" + tcp + "'");
    }
    c.tcp.sack = parse_bool("sack", g("sack"));
    c.tcp.timestamps = parse_bool("timestamps", g("timestamps"));
    c.tcp.delayed_ack = parse_bool("delayed_ack", g("delayed_ack"));
    c.tcp.init_cwnd = parse_f64("init_cwnd", g("init_cwnd"));
    if (!(c.tcp.init_cwnd >= 1)) throw ConfigError("init_cwnd must be at least 1");
    c.tcp.mss = parse_u32("mss", g("mss"));
    if (c.tcp.mss == 0 || c.tcp.mss > kDefaultMss) throw ConfigError("mss must lie in [1, 1460]");
    c.tcp.rto_min = parse_u64("rto_min_us", g("rto_min_us"));
    if (c.tcp.rto_min == 0) throw ConfigError("rto_min_us must be positive");
    c.tcp.rto_initial = parse_u64("rto_init_us", g("rto_init_us"));
    c.tcp.dupack_threshold = parse_u32("dupack_threshold", g("dupack_threshold"));
    if (c.tcp.dupack_threshold == 0) throw ConfigError("dupack_threshold must be positive");
    c.tcp.dctcp_g = parse_f64("dctcp_gain", g("dctcp_gain"));
    if (!(c.tcp.dctcp_g > 0 && c.tcp.dctcp_g <= 1)) throw ConfigError("dctcp_gain must lie in (0, 1]");

    const auto& aqm = g("aqm");
    if (aqm == "droptail") {
        c.aqm.policy.kind = AqmKind::DropTail;
    } else if (aqm == "droprand") {
        c.aqm.policy.kind = AqmKind::DropRand;
    } else if (aqm == "red" || aqm == "red-ecn") {
        c.aqm.policy.kind = AqmKind::RedEcn;
    } else if (aqm == "dctcp") {
        c.aqm.policy.kind = AqmKind::DctcpMark;
    } else {
        throw ConfigError("aqm: unknown value '" + aqm + "'");
    }
    c.aqm.policy.red.min_th = parse_f64("red_min_th", g("red_min_th"));
    c.aqm.policy.red.max_th = parse_f64("red_max_th", g("red_max_th"));
    c.aqm.policy.red.max_p = parse_f64("red_max_p", g("red_max_p"));
    c.aqm.policy.red.wq = parse_f64("red_wq", g("red_wq"));
    const auto& red = c.aqm.policy.red;
    if (!(red.min_th >= 0 && red.max_th > red.min_th && red.max_p > 0 && red.max_p <= 1 && red.wq > 0 && red.wq <= 1))
        throw ConfigError("RED parameters need 0 <= min_th < max_th, max_p and wq in (0, 1]");
    c.aqm.dctcp_k_override = parse_u32("dctcp_k", g("dctcp_k"));

    c.shim_enabled = parse_bool("shim", g("shim"));
    c.shim.alpha = parse_f64("alpha", g("alpha"));
    if (!(c.shim.alpha >= 1)) throw ConfigError("alpha must be >= 1");
    c.shim.gamma = g("gamma") == "inf" ? kGammaInfinite : parse_u64("gamma", g("gamma"));
    if (c.shim.gamma == 0) throw ConfigError("gamma must be positive or inf");
    c.shim.phi = parse_u32("phi", g("phi"));
    c.shim.rto_min = parse_u64("shim_rto_min_us", g("shim_rto_min_us"));
    c.shim.tick_period = parse_u64("tick_us", g("tick_us"));
    if (c.shim.tick_period == 0) throw ConfigError("tick_us must be at least 1");
    c.shim.inactivity_timeout = parse_u64("inactivity_us", g("inactivity_us"));
    c.shim.default_rtt_us = parse_f64("default_rtt_us", g("default_rtt_us"));
    c.shim.table_size = parse_u32("flow_table_size", g("flow_table_size"));

    const auto& wl = g("workload");
    if (wl == "websearch" || wl == "datamining" || wl == "educational" || wl == "privatedc") {
        c.workload_cdf = (std::filesystem::path(g("workload_dir")) / (wl + ".cdf")).string();
    } else {
        c.workload_cdf = wl;
    }
    c.poisson.load = parse_f64("load", g("load"));
    if (!(c.poisson.load > 0 && c.poisson.load < 1)) throw ConfigError("load must lie in (0, 1)");
    const auto& pat = g("pattern");
    if (pat == "all_to_all") {
        c.poisson.pattern = TrafficPattern::AllToAll;
    } else if (pat == "one_to_all") {
        c.poisson.pattern = TrafficPattern::OneToAll;
    } else {
        throw ConfigError("pattern: unknown value '" + pat + "'");
    }
    c.poisson.window = parse_u64("arrival_window_us", g("arrival_window_us"));
    if (c.scenario == ScenarioKind::Poisson) FlowSizeCdf::load_file(c.workload_cdf);  // fail early on a bad CDF

    const auto& loss = g("loss");
    if (loss == "none") {
        c.loss = LossInjection::None;
    } else if (loss == "flow_tail") {
        c.loss = LossInjection::FlowTail;
    } else if (loss == "flow_head") {
        c.loss = LossInjection::FlowHead;
    } else {
        throw ConfigError("loss: unknown value '" + loss + "'");
    }

    c.seed = parse_u64("seed", g("seed"));
    c.duration = parse_u64("duration_us", g("duration_us"));
    if (c.duration == 0) throw ConfigError("duration_us must be positive");
    c.deadline = parse_u64("deadline_us", g("deadline_us"));
    c.stop_when_done = parse_bool("stop_when_done", g("stop_when_done"));
    return c;
}

}  // namespace tracks
