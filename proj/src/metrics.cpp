#include "tracks/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tracks/errors.hpp"

namespace tracks {

const char* const kFlowCsvHeader =
    "flow_id,src,dst,size_bytes,class,start_us,end_us,fct_us,rto_events,frr_events,"
    "rack_assisted_frr_events,spoofed_acks_received,deadline_missed";
const char* const kRecoveryCsvHeader =
    "flow_id,kind,cwnd_mss,loss_index_fraction,burst_fraction,recovery_duration_us";

void FlowDataset::record_flow(const FlowRecord& r) {
    if (!ids_.insert(r.flow_id).second)
        throw std::logic_error("flow " + std::to_string(r.flow_id) + " recorded twice");
    rows_.push_back(r);
}

bool misses_deadline(const FlowRecord& r, SimTime deadline, SimTime run_end) {
    if (r.size_class != SizeClass::Small) return false;
    if (r.end) return *r.end - r.start > deadline;
    return run_end > r.start && run_end - r.start > deadline;
}

double nearest_rank(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::domain_error("percentile of an empty sample");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::vector<double> completed_fcts(const std::vector<FlowRecord>& rows, std::optional<SizeClass> cls) {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (cls && r.size_class != *cls) continue;
        if (auto f = r.fct()) v.push_back(static_cast<double>(*f));
    }
    std::sort(v.begin(), v.end());
    return v;
}

std::vector<std::pair<double, double>> fct_percentiles(const std::vector<FlowRecord>& rows,
                                                       std::optional<SizeClass> cls,
                                                       const std::vector<double>& ps) {
    const auto v = completed_fcts(rows, cls);
    std::vector<std::pair<double, double>> out;
    if (v.empty()) return out;
    for (double p : ps) out.emplace_back(p, nearest_rank(v, p));
    return out;
}

std::optional<double> mean_fct(const std::vector<FlowRecord>& rows, std::optional<SizeClass> cls) {
    const auto v = completed_fcts(rows, cls);
    if (v.empty()) return std::nullopt;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

int fraction_bin(double f) {
    if (!(f > 0)) return 0;
    const int b = static_cast<int>(std::ceil(f * 10.0 - 1e-9)) - 1;
    return std::clamp(b, 0, 9);
}

RecoverySummary classify_recovery(const std::vector<RecoveryEvent>& events) {
    RecoverySummary s;
    for (const auto& e : events) {
        const int k = e.kind == RecoveryKind::Frr ? 0 : 1;
        s.burst[k].mass[fraction_bin(e.burst_fraction)] += 1;
        s.loss_index[k].mass[fraction_bin(e.loss_index_fraction)] += 1;
        ++s.burst[k].events;
        ++s.loss_index[k].events;
        s.cwnd[k].push_back(e.cwnd_mss);
    }
    for (int k = 0; k < 2; ++k) {
        for (auto* h : {&s.burst[k], &s.loss_index[k]}) {
            if (h->events == 0) continue;
            for (auto& m : h->mass) m /= static_cast<double>(h->events);
        }
        std::sort(s.cwnd[k].begin(), s.cwnd[k].end());
    }
    return s;
}

FluidThroughput fluid_throughput(double B, double N, double C, double n, double tau, double rto,
                                 double n_prime, double tau_prime) {
    if (!(C > 0)) throw std::domain_error("capacity must be positive");
    if (!(B > 0) || !(N > 0) || !(n > 0) || !(tau > 0)) throw std::domain_error("B, N, n and tau must be positive");
    if (!(rto >= 0)) throw std::domain_error("rto must be non-negative");
    if (!(n_prime >= n) || !(tau_prime >= tau)) throw std::domain_error("n' >= n and tau' >= tau required");
    const double serial = B * N / C;
    return {B / (n * tau + serial), B / (rto + n_prime * tau_prime + serial)};
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, p);
}

void write_flow_csv(std::ostream& os, const std::vector<FlowRecord>& rows) {
    os << kFlowCsvHeader << '\n';
    for (const auto& r : rows) {
        os << r.flow_id << ',' << r.src << ',' << r.dst << ',' << r.size_bytes << ',' << to_string(r.size_class)
           << ',' << r.start << ',';
        if (r.end) os << *r.end;
        os << ',';
        if (auto f = r.fct()) os << *f;
        os << ',' << r.rto_events << ',' << r.frr_events << ',' << r.rack_assisted_frr_events << ','
           << r.spoofed_acks_received << ',' << (r.deadline_missed ? 1 : 0) << '\n';
    }
}

void write_recovery_csv(std::ostream& os, const std::vector<RecoveryEvent>& events) {
    os << kRecoveryCsvHeader << '\n';
    for (const auto& e : events) {
        os << e.flow_id << ',' << to_string(e.kind) << ',' << format_double(e.cwnd_mss) << ','
           << format_double(e.loss_index_fraction) << ',' << format_double(e.burst_fraction) << ','
           << e.recovery_duration << '\n';
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

template <class T>
T parse_num(const std::string& s, const std::string& where) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(where + ": bad number '" + s + "'");
    return v;
}

}  // namespace

std::vector<FlowRecord> read_flow_csv(std::istream& is, const std::string& origin) {
    std::string line;
    if (!std::getline(is, line) || split_csv(line) != split_csv(kFlowCsvHeader))
        throw ConfigError(origin + ": missing or unexpected flow CSV header");
    std::vector<FlowRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (f.size() != 13) throw ConfigError(where + ": expected 13 fields");
        FlowRecord r;
        r.flow_id = parse_num<std::uint32_t>(f[0], where);
        r.src = parse_num<std::uint32_t>(f[1], where);
        r.dst = parse_num<std::uint32_t>(f[2], where);
        r.size_bytes = parse_num<std::uint64_t>(f[3], where);
        auto cls = parse_size_class(f[4]);
        if (!cls) throw ConfigError(where + ": unknown class '" + f[4] + "'");
        r.size_class = *cls;
        r.start = parse_num<SimTime>(f[5], where);
        if (!f[6].empty()) r.end = parse_num<SimTime>(f[6], where);
        r.rto_events = parse_num<std::uint32_t>(f[8], where);
        r.frr_events = parse_num<std::uint32_t>(f[9], where);
        r.rack_assisted_frr_events = parse_num<std::uint32_t>(f[10], where);
        r.spoofed_acks_received = parse_num<std::uint32_t>(f[11], where);
        r.deadline_missed = f[12] == "1";
        out.push_back(r);
    }
    return out;
}

std::vector<RecoveryEvent> read_recovery_csv(std::istream& is, const std::string& origin) {
    std::string line;
    if (!std::getline(is, line) || split_csv(line) != split_csv(kRecoveryCsvHeader))
        throw ConfigError(origin + ": missing or unexpected recovery CSV header");
    std::vector<RecoveryEvent> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (f.size() != 6) throw ConfigError(where + ": expected 6 fields");
        RecoveryEvent e;
        e.flow_id = parse_num<std::uint32_t>(f[0], where);
        if (f[1] == "frr") {
            e.kind = RecoveryKind::Frr;
        } else if (f[1] == "rto") {
            e.kind = RecoveryKind::Rto;
        } else {
            throw ConfigError(where + ": unknown kind '" + f[1] + "'");
        }
        e.cwnd_mss = parse_num<double>(f[2], where);
        e.loss_index_fraction = parse_num<double>(f[3], where);
        e.burst_fraction = parse_num<double>(f[4], where);
        e.recovery_duration = parse_num<SimTime>(f[5], where);
        out.push_back(e);
    }
    return out;
}

void write_fct_cdf(std::ostream& os, const std::vector<FlowRecord>& rows) {
    os << "class,fct_us,cum_fraction\n";
    for (auto cls : {SizeClass::Small, SizeClass::Medium, SizeClass::Large}) {
        const auto v = completed_fcts(rows, cls);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
            os << to_string(cls) << ',' << format_double(v[i]) << ','
               << format_double(static_cast<double>(i + 1) / static_cast<double>(v.size())) << '\n';
        }
    }
}

void write_round_summary(std::ostream& os, const std::vector<FlowRecord>& rows) {
    struct Acc {
        double sum = 0;
        std::size_t done = 0, total = 0, missed = 0;
    };
    std::map<std::uint32_t, Acc> rounds;
    for (const auto& r : rows) {
        if (r.size_class != SizeClass::Small) continue;
        auto& a = rounds[r.round];
        ++a.total;
        if (r.deadline_missed) ++a.missed;
        if (auto f = r.fct()) {
            a.sum += static_cast<double>(*f);
            ++a.done;
        }
    }
    os << "round,small_flows,completed,mean_fct_us,deadline_misses\n";
    for (const auto& [round, a] : rounds) {
        os << round << ',' << a.total << ',' << a.done << ',';
        if (a.done) os << format_double(a.sum / static_cast<double>(a.done));
        os << ',' << a.missed << '\n';
    }
}

void write_recovery_histograms(std::ostream& os, const RecoverySummary& s) {
    os << "kind,metric,bin_low,bin_high,probability,events\n";
    const char* kinds[2] = {"frr", "rto"};
    for (int k = 0; k < 2; ++k) {
        for (const auto& [name, h] : {std::pair<const char*, const FractionHistogram*>{"burst_fraction", &s.burst[k]},
                                      {"loss_index_fraction", &s.loss_index[k]}}) {
            for (int b = 0; b < 10; ++b) {
                os << kinds[k] << ',' << name << ',' << format_double(b / 10.0) << ','
                   << format_double((b + 1) / 10.0) << ',' << format_double(h->mass[b]) << ',' << h->events << '\n';
            }
        }
    }
}

void write_cwnd_cdf(std::ostream& os, const RecoverySummary& s) {
    os << "kind,cwnd_mss,cum_fraction\n";
    const char* kinds[2] = {"frr", "rto"};
    for (int k = 0; k < 2; ++k) {
        const auto& v = s.cwnd[k];
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
            os << kinds[k] << ',' << format_double(v[i]) << ','
               << format_double(static_cast<double>(i + 1) / static_cast<double>(v.size())) << '\n';
        }
    }
}

}  // namespace tracks
