#include "tracks/topology.hpp"

#include <cmath>
#include <sstream>

#include "tracks/errors.hpp"

namespace tracks {

namespace {

constexpr std::uint32_t kDataFrame = kDefaultMss + kHeaderBytes;
constexpr std::uint32_t kAckFrame = kHeaderBytes;

std::uint64_t ser_ps(std::uint64_t rate_bps, std::uint32_t bytes) {
    Link l;
    l.capacity_bps = rate_bps;
    return l.serialization_ps(bytes);
}

double pkt_time_us(std::uint64_t rate_bps) {
    return static_cast<double>(kDataFrame) * 8.0 * 1e6 / static_cast<double>(rate_bps);
}

PortQueue make_queue(std::uint32_t capacity, const FabricAqm& aqm, std::uint64_t rate_bps,
                     RngStream rng) {
    AqmPolicy p = aqm.policy;
    p.dctcp_k = aqm.dctcp_k_override ? aqm.dctcp_k_override : default_dctcp_k(rate_bps);
    return PortQueue(capacity, p, rng, true, pkt_time_us(rate_bps));
}

PortQueue host_queue(std::uint32_t capacity, std::uint64_t rate_bps) {
    return PortQueue(capacity, AqmPolicy{}, RngStream(0), false, pkt_time_us(rate_bps));
}

Link make_link(std::uint64_t rate_bps, std::uint64_t prop_ps) {
    Link l;
    l.capacity_bps = rate_bps;
    l.propagation_ps = prop_ps;
    return l;
}

}  // namespace

std::uint32_t default_dctcp_k(std::uint64_t rate_bps) {
    return rate_bps >= 10'000'000'000ULL ? 65u : 20u;
}

Dumbbell::Dumbbell(DumbbellSpec spec) : spec_(spec) {
    if (spec_.n_senders == 0) throw ConfigError("dumbbell needs at least one sender");
    if (spec_.host_rate_bps == 0 || spec_.bottleneck_rate_bps == 0)
        throw ConfigError("link rate must be positive");
    const std::uint64_t rtt_ps = spec_.rtt_us * kPsPerUs;
    const std::uint64_t ser = ser_ps(spec_.host_rate_bps, kDataFrame) +
                              ser_ps(spec_.bottleneck_rate_bps, kDataFrame) +
                              2 * ser_ps(spec_.host_rate_bps, kAckFrame);
    if (rtt_ps <= ser) throw ConfigError("rtt_us is smaller than the serialization time of one exchange");
    prop_ps_ = (rtt_ps - ser) / 4;
}

void Dumbbell::build(Network& net, const std::vector<EntityId>& hosts, const FabricAqm& aqm,
                     const RngFactory& rngs) {
    if (hosts.size() != host_count()) throw ConfigError("host entity count mismatch");
    const EntityId sw = net.add_switch();
    nic_.clear();
    down_.clear();
    for (std::uint32_t i = 0; i < spec_.n_senders; ++i) {
        nic_.push_back(net.add_port(make_link(spec_.host_rate_bps, prop_ps_),
                                    host_queue(spec_.host_buffer_pkts, spec_.host_rate_bps), sw));
        down_.push_back(net.add_port(
            make_link(spec_.host_rate_bps, prop_ps_),
            make_queue(spec_.buffer_pkts, aqm, spec_.host_rate_bps,
                       rngs.stream("droprand/down/" + std::to_string(i))),
            hosts[i]));
    }
    // receiver NIC
    nic_.push_back(net.add_port(make_link(spec_.host_rate_bps, prop_ps_),
                                host_queue(spec_.host_buffer_pkts, spec_.host_rate_bps), sw));
    to_receiver_ = net.add_port(make_link(spec_.bottleneck_rate_bps, prop_ps_),
                                make_queue(spec_.buffer_pkts, aqm, spec_.bottleneck_rate_bps,
                                           rngs.stream("droprand/bottleneck")),
                                hosts[receiver()]);
}

std::vector<PortId> Dumbbell::route(HostId src, HostId dst, const FlowTuple&) const {
    if (src >= host_count() || dst >= host_count() || src == dst)
        throw ConfigError("dumbbell route: unknown or identical hosts " + std::to_string(src) + "->" +
                          std::to_string(dst));
    if (nic_.empty()) throw ConfigError("dumbbell route requested before build");
    if (dst == receiver()) return {nic_[src], to_receiver_};
    if (src == receiver()) return {nic_[src], down_[dst]};
    throw ConfigError("dumbbell only routes between senders and the receiver");
}

std::string Dumbbell::describe() const {
    std::ostringstream os;
    os << "dumbbell senders=" << spec_.n_senders << " host_rate_bps=" << spec_.host_rate_bps
       << " bottleneck_rate_bps=" << spec_.bottleneck_rate_bps << " rtt_us=" << spec_.rtt_us
       << " buffer_pkts=" << spec_.buffer_pkts << " propagation_ps=" << prop_ps_;
    return os.str();
}

LeafSpine::LeafSpine(LeafSpineSpec spec) : spec_(spec) {
    if (spec_.n_leaf == 0 || spec_.n_spine == 0 || spec_.hosts_per_leaf == 0)
        throw ConfigError("leaf-spine dimensions must be positive");
    if (!(spec_.oversubscription > 0)) throw ConfigError("oversubscription must be positive");
    const double into_leaf = static_cast<double>(spec_.hosts_per_leaf) *
                             static_cast<double>(spec_.host_rate_bps);
    uplink_bps_ = static_cast<std::uint64_t>(
        std::llround(into_leaf / (spec_.oversubscription * spec_.n_spine)));
    if (uplink_bps_ == 0) throw ConfigError("uplink rate rounds to zero");
    if (spec_.buffer_pkts) {
        buffer_pkts_ = spec_.buffer_pkts;
    } else {
        // Bandwidth-delay product between two hosts on the same leaf,
        // rounded up to whole data frames.
        const double rtt_s = 4.0 * static_cast<double>(spec_.hop_delay_us) * 1e-6;
        const double bdp_bits = static_cast<double>(spec_.host_rate_bps) * rtt_s;
        buffer_pkts_ = static_cast<std::uint32_t>(std::ceil(bdp_bits / (kDataFrame * 8.0) - 1e-9));
        if (buffer_pkts_ == 0) buffer_pkts_ = 1;
    }
}

void LeafSpine::build(Network& net, const std::vector<EntityId>& hosts, const FabricAqm& aqm,
                      const RngFactory& rngs) {
    if (hosts.size() != host_count()) throw ConfigError("host entity count mismatch");
    const std::uint64_t prop = spec_.hop_delay_us * kPsPerUs;
    std::vector<EntityId> leaf(spec_.n_leaf), spine(spec_.n_spine);
    for (auto& l : leaf) l = net.add_switch();
    for (auto& s : spine) s = net.add_switch();

    nic_.assign(host_count(), 0);
    down_.assign(host_count(), 0);
    for (HostId h = 0; h < host_count(); ++h) {
        nic_[h] = net.add_port(make_link(spec_.host_rate_bps, prop),
                               host_queue(spec_.host_buffer_pkts, spec_.host_rate_bps), leaf[rack_of(h)]);
        down_[h] = net.add_port(make_link(spec_.host_rate_bps, prop),
                                make_queue(buffer_pkts_, aqm, spec_.host_rate_bps,
                                           rngs.stream("droprand/down/" + std::to_string(h))),
                                hosts[h]);
    }
    up_.assign(static_cast<std::size_t>(spec_.n_leaf) * spec_.n_spine, 0);
    spine_down_.assign(up_.size(), 0);
    for (std::uint32_t l = 0; l < spec_.n_leaf; ++l) {
        for (std::uint32_t s = 0; s < spec_.n_spine; ++s) {
            up_[l * spec_.n_spine + s] = net.add_port(
                make_link(uplink_bps_, prop),
                make_queue(buffer_pkts_, aqm, uplink_bps_,
                           rngs.stream("droprand/up/" + std::to_string(l) + "/" + std::to_string(s))),
                spine[s]);
            spine_down_[s * spec_.n_leaf + l] = net.add_port(
                make_link(uplink_bps_, prop),
                make_queue(buffer_pkts_, aqm, uplink_bps_,
                           rngs.stream("droprand/spine/" + std::to_string(s) + "/" + std::to_string(l))),
                leaf[l]);
        }
    }
}

std::uint32_t LeafSpine::spine_for(const FlowTuple& t) const {
    const std::uint64_t packed = (static_cast<std::uint64_t>(t.src_ip) << 32) ^ t.dst_ip;
    const std::uint64_t ports = (static_cast<std::uint64_t>(t.src_port) << 16) | t.dst_port;
    return static_cast<std::uint32_t>(mix64(packed ^ mix64(ports)) % spec_.n_spine);
}

std::vector<PortId> LeafSpine::route(HostId src, HostId dst, const FlowTuple& tuple) const {
    if (src >= host_count() || dst >= host_count() || src == dst)
        throw ConfigError("leaf-spine route: unknown or identical hosts " + std::to_string(src) + "->" +
                          std::to_string(dst));
    if (nic_.empty()) throw ConfigError("leaf-spine route requested before build");
    const auto ls = rack_of(src), ld = rack_of(dst);
    if (ls == ld) return {nic_[src], down_[dst]};
    const auto s = spine_for(tuple);
    return {nic_[src], up_[ls * spec_.n_spine + s], spine_down_[s * spec_.n_leaf + ld], down_[dst]};
}

double LeafSpine::base_rtt_us() const {
    const double prop = 8.0 * static_cast<double>(spec_.hop_delay_us);
    const auto ser = [&](std::uint32_t bytes) {
        return static_cast<double>(2 * ser_ps(spec_.host_rate_bps, bytes) +
                                   2 * ser_ps(uplink_bps_, bytes)) /
               static_cast<double>(kPsPerUs);
    };
    return prop + ser(kDataFrame) + ser(kAckFrame);
}

double LeafSpine::load_capacity_bps() const {
    // Bisection: half of the aggregate leaf uplink capacity.
    return static_cast<double>(uplink_bps_) * spec_.n_spine * spec_.n_leaf / 2.0;
}

std::string LeafSpine::describe() const {
    std::ostringstream os;
    os << "leafspine leaves=" << spec_.n_leaf << " spines=" << spec_.n_spine
       << " hosts_per_leaf=" << spec_.hosts_per_leaf << " host_rate_bps=" << spec_.host_rate_bps
       << " uplink_rate_bps=" << uplink_bps_ << " oversubscription=" << spec_.oversubscription
       << " hop_delay_us=" << spec_.hop_delay_us << " buffer_pkts=" << buffer_pkts_;
    return os.str();
}

}  // namespace tracks
