// End-to-end acceptance checks. One line per criterion:
//   criterion <n>: PASS|FAIL  <measured values>
// Exit status is non-zero when any selected criterion fails. Arguments pick
// a subset, e.g. `acceptance 1 6`.
#include <algorithm>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "properties.hpp"
#include "tracks/metrics.hpp"

using namespace tracks;
using namespace tracks::testing;

namespace {

constexpr int kIncastSeeds = 5;
constexpr int kLeafSpineSeeds = 3;
// Arrival window for the α comparison; each run drains for a few more seconds.
constexpr const char* kLeafSpineWindowUs = "1000000";

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

RunResult run(const Config& c) { return run_experiment(c.to_experiment()); }

std::uint64_t total_rto(const RunResult& r) {
    std::uint64_t n = 0;
    for (const auto& f : r.flows) n += f.rto_events;
    return n;
}

std::uint64_t total_rack(const RunResult& r) {
    std::uint64_t n = 0;
    for (const auto& f : r.flows) n += f.rack_assisted_frr_events;
    return n;
}

std::vector<double> small_fcts(const std::vector<RunResult>& runs) {
    std::vector<double> v;
    for (const auto& r : runs) {
        const auto f = completed_fcts(r.flows, SizeClass::Small);
        v.insert(v.end(), f.begin(), f.end());
    }
    std::sort(v.begin(), v.end());
    return v;
}

double p95(const std::vector<RunResult>& runs) { return nearest_rank(small_fcts(runs), 95); }

// A shim-on run and its shim-off twin (same seed, same schedule).
struct Pair {
    std::string label;
    RunResult on, off;
};

// Lazily computed runs shared between criteria.
struct Runs {
    std::map<std::string, std::vector<RunResult>> cache;

    const std::vector<RunResult>& get(const std::string& key, const Config& base, int seeds) {
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        std::vector<RunResult> v;
        for (int s = 1; s <= seeds; ++s) {
            Config c = base;
            c.set("seed", std::to_string(s));
            v.push_back(run(c));
        }
        return cache[key] = std::move(v);
    }

    const std::vector<RunResult>& incast(int flows, bool shim) {
        return get(fmt("case1/%d/%s", flows, shim ? "on" : "off"),
                   make_config({{"scenario", "case1"}, {"flows", std::to_string(flows)}, {"shim", shim ? "on" : "off"}}),
                   kIncastSeeds);
    }

    struct AqmSetup {
        const char* aqm;
        const char* tcp;
    };
    static constexpr AqmSetup kAqms[] = {
        {"droptail", "newreno"}, {"droprand", "newreno"}, {"red", "newreno-ecn"}, {"dctcp", "dctcp"}};

    const std::vector<RunResult>& case2(const AqmSetup& a, bool shim) {
        return get(fmt("case2/%s/%s", a.aqm, shim ? "on" : "off"),
                   make_config({{"scenario", "case2"}, {"flows", "20"}, {"aqm", a.aqm}, {"tcp", a.tcp},
                                {"shim", shim ? "on" : "off"}}),
                   kIncastSeeds);
    }

    Config leafspine_base() const {
        return make_config({{"scenario", "poisson"}, {"workload", "websearch"}, {"load", "0.7"},
                            {"arrival_window_us", kLeafSpineWindowUs}});
    }

    const std::vector<RunResult>& leafspine(const char* alpha) {
        auto c = leafspine_base();
        c.set("alpha", alpha);
        return get(fmt("ls/alpha=%s", alpha), c, kLeafSpineSeeds);
    }

    const std::vector<RunResult>& leafspine_off() {
        auto c = leafspine_base();
        c.set("shim", "off");
        return get("ls/off", c, kLeafSpineSeeds);
    }
};

Runs g_runs;

double over_deadline_fraction(const std::vector<RunResult>& runs) {
    std::size_t n = 0, over = 0;
    for (const auto& r : runs) {
        for (const auto& f : r.flows) {
            if (f.size_class != SizeClass::Small) continue;
            ++n;
            const SimTime fct = f.completed() ? *f.fct() : r.end_time - f.start;
            over += fct >= 200 * kMsec;
        }
    }
    return n ? static_cast<double>(over) / static_cast<double>(n) : 0;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
    const double f20 = over_deadline_fraction(g_runs.incast(20, false));
    const double f80 = over_deadline_fraction(g_runs.incast(80, false));
    return {f20 >= 0.25 && f80 >= 0.80,
            fmt("shim off, FCT >= 200 ms: 20 flows %.3f (need >= 0.25), 80 flows %.3f (need >= 0.80)", f20, f80)};
}

Outcome criterion2() {
    const double on20 = p95(g_runs.incast(20, true)), off20 = p95(g_runs.incast(20, false));
    const double on80 = p95(g_runs.incast(80, true)), off80 = p95(g_runs.incast(80, false));
    const double k20 = off20 / on20, k80 = off80 / on80;
    const bool ok = on20 <= 40 * kMsec && k20 >= 5 && k80 >= 2;
    return {ok, fmt("p95 20 flows %.0f us on / %.0f us off (x%.2f, need <= 40000 us and >= x5); "
                    "80 flows %.0f / %.0f (x%.2f, need >= x2)",
                    on20, off20, k20, on80, off80, k80)};
}

Outcome criterion3() {
    bool ok = true;
    std::string d;
    for (const auto& a : Runs::kAqms) {
        const double on = p95(g_runs.case2(a, true)), off = p95(g_runs.case2(a, false));
        const double k = off / on;
        const bool strong = std::string(a.aqm) == "droptail" || std::string(a.aqm) == "dctcp";
        const bool good = on < off && (!strong || k >= 1.3);
        ok &= good;
        d += fmt("%s%s/%s %.0f/%.0f us x%.2f%s", d.empty() ? "" : "; ", a.aqm, a.tcp, on, off, k,
                 good ? "" : " (short)");
    }
    return {ok, "case2 p95 on/off: " + d};
}

Outcome criterion4() {
    std::map<std::string, double> mean;
    for (const char* a : {"1", "10", "100"}) {
        double sum = 0;
        const auto& runs = g_runs.leafspine(a);
        for (const auto& r : runs) sum += *mean_fct(r.flows, SizeClass::Small);
        mean[a] = sum / static_cast<double>(runs.size());
    }
    const bool ok = mean["10"] <= mean["1"] && mean["10"] <= mean["100"];
    return {ok, fmt("websearch load 0.7, mean small FCT over %d seeds: alpha=1 %.0f us, alpha=10 %.0f us, "
                    "alpha=100 %.0f us",
                    kLeafSpineSeeds, mean["1"], mean["10"], mean["100"])};
}

Outcome criterion5() {
    std::vector<Pair> pairs;
    auto add = [&](const std::string& label, const std::vector<RunResult>& on, const std::vector<RunResult>& off) {
        for (std::size_t s = 0; s < on.size(); ++s) pairs.push_back({fmt("%s seed %zu", label.c_str(), s + 1), on[s], off[s]});
    };
    add("case1/20", g_runs.incast(20, true), g_runs.incast(20, false));
    add("case1/80", g_runs.incast(80, true), g_runs.incast(80, false));
    for (const auto& a : Runs::kAqms) add(std::string("case2/") + a.aqm, g_runs.case2(a, true), g_runs.case2(a, false));
    for (const char* al : {"1", "10", "100"})
        add(std::string("leafspine/alpha=") + al, g_runs.leafspine(al), g_runs.leafspine_off());

    std::size_t fewer = 0, with_rack = 0;
    std::string bad;
    std::uint64_t on_total = 0, off_total = 0;
    for (const auto& p : pairs) {
        const auto a = total_rto(p.on), b = total_rto(p.off);
        on_total += a;
        off_total += b;
        const bool lt = a < b, rack = total_rack(p.on) > 0;
        fewer += lt;
        with_rack += rack;
        if ((!lt || !rack) && bad.size() < 300)
            bad += fmt("%s%s: %llu vs %llu RTOs, %llu rack-assisted", bad.empty() ? "" : "; ", p.label.c_str(),
                       static_cast<unsigned long long>(a), static_cast<unsigned long long>(b),
                       static_cast<unsigned long long>(total_rack(p.on)));
    }
    const bool ok = fewer == pairs.size() && with_rack == pairs.size();
    return {ok, fmt("%zu/%zu shim-on runs with fewer RTOs, %zu/%zu with rack-assisted FRR, totals %llu vs %llu",
                    fewer, pairs.size(), with_rack, pairs.size(), static_cast<unsigned long long>(on_total),
                    static_cast<unsigned long long>(off_total)) +
                    (bad.empty() ? "" : " [" + bad + "]")};
}

// Timeline of the single tail-drop flow.
struct TailWatch : Observer {
    std::optional<SimTime> first_data_tx;  // NIC admission of the first data segment
    std::vector<std::pair<SimTime, bool>> rtx;  // time, by RTO
    SimTime last_real_ack = 0;
    struct Open {
        SimTime at, last_activity;
        double beta, rtt;
    };
    std::vector<Open> opens;

    void on_admit(PortId, const Segment& s, std::uint32_t, AdmitResult, SimTime now) override {
        if (s.payload_len > 0 && !s.retransmission && !first_data_tx) first_data_tx = now;
    }
    void on_retransmit(std::uint32_t, std::uint64_t, bool rto, SimTime now) override { rtx.emplace_back(now, rto); }
    void on_sender_ack(std::uint32_t, const Segment& s, SimTime now) override {
        if (!s.spoofed && opens.empty()) last_real_ack = now;
    }
    void on_episode_open(HostId, const FlowTuple&, SimTime now, SimTime last, double beta, double rtt) override {
        opens.push_back({now, last, beta, rtt});
    }
};

Outcome criterion6() {
    const auto base = make_config({{"scenario", "single"}, {"single_bytes", "2920"}, {"loss", "flow_tail"}});
    std::vector<std::string> fails;
    auto need = [&](bool c, const std::string& what) {
        if (!c) fails.push_back(what);
    };

    // shim off: timeout exactly RTO_min after the lost segment left
    auto off_cfg = base;
    off_cfg.set("shim", "off");
    auto off_exp = off_cfg.to_experiment();
    TailWatch off_w;
    off_exp.observer = &off_w;
    const auto off = run_experiment(off_exp);
    need(off_w.rtx.size() == 1 && off_w.rtx[0].second, "shim off: one RTO retransmission");
    const long long off_gap = off_w.rtx.empty() || !off_w.first_data_tx
                                  ? -1
                                  : static_cast<long long>(off_w.rtx[0].first - *off_w.first_data_tx);
    need(off_gap >= 200'000 && off_gap <= 200'001, fmt("shim off: rtx - tx = %lld", off_gap));
    need(off.recoveries.size() == 1 && off.recoveries[0].kind == RecoveryKind::Rto, "shim off: one RTO event");

    // shim on: episode after β, φ spoofs, fast retransmit, one RTT to finish
    auto on_exp = base.to_experiment();
    TailWatch w;
    on_exp.observer = &w;
    const auto on = run_experiment(on_exp);
    const double alpha = on_exp.shim.alpha;
    const SimTime tick = on_exp.shim.tick_period;
    const std::uint32_t phi = on_exp.shim.phi;
    SimTime open = 0, rtx = 0, end = 0;
    double beta = 0, rtt = 0;
    if (w.opens.size() != 1) {
        fails.push_back(fmt("shim on: %zu episodes", w.opens.size()));
    } else {
        const auto& o = w.opens[0];
        open = o.at;
        beta = o.beta;
        rtt = o.rtt;
        need(o.last_activity == w.last_real_ack, "shim on: last activity is the last real ACK");
        need(beta >= alpha * rtt && beta < (alpha + 1) * rtt, "shim on: beta within [a*rtt, (a+1)*rtt)");
        const double idle = static_cast<double>(open - o.last_activity);
        need(open % tick == 0, "shim on: episode opens on a tick");
        need(idle >= beta, "shim on: episode not before beta");
        need(idle - static_cast<double>(tick) < (alpha + 1) * rtt, "shim on: episode within one tick of beta");
    }
    if (w.rtx.size() != 1 || w.rtx[0].second) {
        fails.push_back("shim on: one fast retransmission");
    } else {
        rtx = w.rtx[0].first;
        need(rtx == open + static_cast<SimTime>(phi) - 1, "shim on: rtx on the phi-th spoof");
    }
    if (on.flows.empty() || !on.flows[0].completed()) {
        fails.push_back("shim on: flow incomplete");
    } else {
        end = *on.flows[0].end;
        const SimTime base_rtt = static_cast<SimTime>(std::ceil(on.base_rtt_us));
        need(end - rtx >= base_rtt && end - rtx <= base_rtt + 4, fmt("shim on: end - rtx = %lld", static_cast<long long>(end - rtx)));
        need(on.flows[0].rto_events == 0 && on.flows[0].rack_assisted_frr_events == 1,
             "shim on: recovered by one rack-assisted FRR");
    }
    std::string d = fmt("off: rtx-tx %lld us; on: last ACK %lld, beta %.1f (rtt %.1f), open %lld, rtx %lld, done %lld",
                        off_gap, static_cast<long long>(w.last_real_ack), beta, rtt,
                        static_cast<long long>(open), static_cast<long long>(rtx), static_cast<long long>(end));
    for (const auto& f : fails) d += " [" + f + "]";
    return {fails.empty(), d};
}

Outcome criterion7() {
    const auto rep = run_property_suite();
    bool ok = true;
    std::string d;
    for (const auto& [name, v] : rep.by_property) {
        ok &= v.empty();
        d += fmt("%s%s %s", d.empty() ? "" : ", ", name.c_str(), v.empty() ? "ok" : "VIOLATED");
        if (!v.empty()) d += " (" + v.front() + ")";
    }
    return {ok, fmt("%zu lossy + %zu lossless scenarios: ", property_scenarios().size(), lossless_scenarios().size()) + d};
}

Outcome criterion8() {
    std::vector<std::string> fails;
    const auto id = fluid_throughput(1e6, 4, 1e9, 3, 1e-4, 0, 3, 1e-4);
    if (std::fabs(id.rho - id.rho_star) / id.rho_star > 1e-9) fails.push_back("identity");
    const auto b = fluid_throughput(1e6, 2, 1e9, 3, 1e-4, 0.2, 3, 1e-4);
    if (!(fluid_throughput(1e6, 4, 1e9, 3, 1e-4, 0.2, 3, 1e-4).rho < b.rho)) fails.push_back("monotone in N");
    if (!(fluid_throughput(1e6, 2, 1e9, 3, 1e-4, 0.4, 3, 1e-4).rho < b.rho)) fails.push_back("monotone in rto");
    // 10 full segments (116800 bits), one flow, 1 Gbps, 100 us RTT, 200 ms timeout
    const auto n = fluid_throughput(116'800, 1, 1e9, 1, 1e-4, 0.2, 1, 1e-4);
    const double rs = 116'800 / (1e-4 + 1.168e-4), r = 116'800 / (0.2 + 1e-4 + 1.168e-4);
    const double e1 = std::fabs(n.rho_star - rs) / rs, e2 = std::fabs(n.rho - r) / r;
    if (e1 > 1e-9 || e2 > 1e-9) fails.push_back("numeric case");
    std::string d = fmt("numeric case rho* %.6g (err %.1e), rho %.6g (err %.1e)", n.rho_star, e1, n.rho, e2);
    for (const auto& f : fails) d += " [" + f + "]";
    return {fails.empty(), d};
}

Outcome criterion9() {
    std::size_t rto = 0, rto_top = 0, head_events = 0, head_frr = 0;
    for (int s = 1; s <= 3; ++s) {
        auto c = make_config({{"flows", "20"}, {"buffer_pkts", "10000"}, {"shim", "off"}, {"seed", std::to_string(s)}});
        c.set("loss", "flow_tail");
        for (const auto& e : run(c).recoveries) {
            if (e.kind != RecoveryKind::Rto) continue;
            ++rto;
            rto_top += fraction_bin(e.loss_index_fraction) >= 8;
        }
        c.set("loss", "flow_head");
        for (const auto& e : run(c).recoveries) {
            ++head_events;
            head_frr += e.kind == RecoveryKind::Frr;
        }
    }
    const double ft = rto ? static_cast<double>(rto_top) / static_cast<double>(rto) : 0;
    const double fh = head_events ? static_cast<double>(head_frr) / static_cast<double>(head_events) : 0;
    return {rto > 0 && head_events > 0 && ft >= 0.9 && fh >= 0.9,
            fmt("tail drops: %zu RTO events, %.3f in top two loss-index bins; head drops: %zu events, %.3f FRR", rto,
                ft, head_events, fh)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (int i = 1; i <= static_cast<int>(all.size()); ++i) {
        if (!pick.empty() && !pick.count(i)) continue;
        Outcome o;
        try {
            o = all[i - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d: %s  %s\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
