#include "tracks/workload.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tracks/errors.hpp"

namespace tracks {

FlowSizeCdf::FlowSizeCdf(std::vector<std::pair<double, double>> points) : pts_(std::move(points)) {
    if (pts_.empty()) throw ConfigError("flow size CDF has no breakpoints");
    for (std::size_t i = 0; i < pts_.size(); ++i) {
        const auto [s, p] = pts_[i];
        if (!(s >= 0) || !(p > 0) || p > 1.0 + 1e-12)
            throw ConfigError("flow size CDF breakpoint out of range");
        if (i > 0 && (s <= pts_[i - 1].first || p <= pts_[i - 1].second))
            throw ConfigError("flow size CDF must be strictly increasing in size and probability");
    }
    if (std::fabs(pts_.back().second - 1.0) > 1e-9) throw ConfigError("flow size CDF must end at probability 1");
    pts_.back().second = 1.0;
    if (!(mean() > 0)) throw ConfigError("flow size CDF has zero mean");
}

FlowSizeCdf FlowSizeCdf::parse(const std::string& text, const std::string& origin) {
    std::vector<std::pair<double, double>> pts;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        double s, p;
        if (!(ls >> s)) continue;
        std::string rest;
        if (!(ls >> p) || (ls >> rest))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `<size_bytes> <cumulative_prob>`");
        pts.emplace_back(s, p);
    }
    try {
        return FlowSizeCdf(std::move(pts));
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

FlowSizeCdf FlowSizeCdf::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read CDF file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

double FlowSizeCdf::inverse(double u) const {
    if (u <= pts_.front().second) return pts_.front().first;
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        if (u <= pts_[i].second) {
            const auto [s0, p0] = pts_[i - 1];
            const auto [s1, p1] = pts_[i];
            return s0 + (s1 - s0) * (u - p0) / (p1 - p0);
        }
    }
    return pts_.back().first;
}

std::uint64_t FlowSizeCdf::sample(RngStream& rng) const {
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(inverse(rng.uniform01()))));
}

double FlowSizeCdf::mean() const {
    double m = pts_.front().first * pts_.front().second;
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        m += (pts_[i].second - pts_[i - 1].second) * (pts_[i].first + pts_[i - 1].first) / 2.0;
    }
    return m;
}

std::vector<FlowSpec> gen_incast_round(const IncastSpec& spec, std::uint32_t round, HostId receiver,
                                       RngStream& gaps, RngStream& order, std::uint32_t first_id) {
    std::vector<HostId> senders(spec.n_small);
    for (std::uint32_t i = 0; i < spec.n_small; ++i) senders[i] = i;
    shuffle_in_place(senders, order);

    std::vector<FlowSpec> out;
    out.reserve(spec.n_small);
    const SimTime base = static_cast<SimTime>(round) * spec.round_interval;
    double offset = 0;
    for (std::uint32_t k = 0; k < spec.n_small; ++k) {
        offset += gaps.exponential(spec.mean_gap_us);
        FlowSpec f;
        f.flow_id = first_id + k;
        f.src = senders[k];
        f.dst = receiver;
        f.size_bytes = spec.small_bytes;
        f.start = base + static_cast<SimTime>(std::llround(offset));
        f.round = round;
        out.push_back(f);
    }
    return out;
}

std::vector<FlowSpec> gen_incast_schedule(const IncastSpec& spec, HostId receiver, const RngFactory& rngs) {
    std::vector<FlowSpec> out;
    std::uint32_t id = 0;
    for (std::uint32_t l = 0; l < spec.n_large(); ++l) {
        FlowSpec f;
        f.flow_id = id++;
        f.src = spec.n_small + l;
        f.dst = receiver;
        f.size_bytes = kPersistentFlow;
        out.push_back(f);
    }
    RngStream gaps = rngs.stream("arrivals");
    RngStream order = rngs.stream("order");
    for (std::uint32_t r = 0; r < spec.rounds; ++r) {
        auto round = gen_incast_round(spec, r, receiver, gaps, order, id);
        id += static_cast<std::uint32_t>(round.size());
        out.insert(out.end(), round.begin(), round.end());
    }
    return out;
}

double poisson_rate(double load, double capacity_bps, double mean_bytes) {
    if (!(mean_bytes > 0)) throw ConfigError("mean flow size must be positive");
    return load * capacity_bps / (mean_bytes * 8.0);
}

std::vector<FlowSpec> gen_poisson_flows(const PoissonSpec& spec, const FlowSizeCdf& cdf, const Topology& topo,
                                        const RngFactory& rngs) {
    if (!(spec.load > 0 && spec.load < 1)) throw ConfigError("load must lie in (0, 1)");
    const auto hosts = static_cast<HostId>(topo.host_count());
    if (hosts < 2) throw ConfigError("Poisson workloads need at least two hosts");
    const double lambda = poisson_rate(spec.load, topo.load_capacity_bps(), cdf.mean());
    const double mean_gap_us = 1e6 / lambda;

    std::vector<HostId> clients, servers;
    for (HostId h = 0; h < hosts; ++h) (topo.rack_of(h) == 0 ? clients : servers).push_back(h);
    if (spec.pattern == TrafficPattern::OneToAll && (clients.empty() || servers.empty()))
        throw ConfigError("one_to_all needs hosts both inside and outside rack 0");

    RngStream arrivals = rngs.stream("arrivals");
    RngStream sizes = rngs.stream("sizes");
    RngStream pairs = rngs.stream("pairs");
    std::vector<FlowSpec> out;
    double t = 0;
    for (;;) {
        t += arrivals.exponential(mean_gap_us);
        const auto start = static_cast<SimTime>(std::llround(t));
        if (start >= spec.window) break;
        FlowSpec f;
        f.flow_id = static_cast<std::uint32_t>(out.size());
        f.start = start;
        f.size_bytes = cdf.sample(sizes);
        if (spec.pattern == TrafficPattern::AllToAll) {
            f.src = static_cast<HostId>(pairs.below(hosts));
            f.dst = static_cast<HostId>(pairs.below(hosts - 1));
            if (f.dst >= f.src) ++f.dst;
        } else {
            f.src = clients[pairs.below(clients.size())];
            f.dst = servers[pairs.below(servers.size())];
        }
        out.push_back(f);
    }
    return out;
}

}  // namespace tracks
