// Dumbbell and leaf-spine topologies: port construction and per-flow routes.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tracks/fabric.hpp"

namespace tracks {

struct DumbbellSpec {
    std::uint32_t n_senders = 20;
    std::uint64_t host_rate_bps = 1'000'000'000;
    std::uint64_t bottleneck_rate_bps = 1'000'000'000;
    SimTime rtt_us = 100;  // unloaded host-to-host RTT (full data frame + pure ACK)
    std::uint32_t buffer_pkts = 100;
    std::uint32_t host_buffer_pkts = 10000;
};

struct LeafSpineSpec {
    std::uint32_t n_leaf = 9;
    std::uint32_t n_spine = 4;
    std::uint32_t hosts_per_leaf = 4;
    std::uint64_t host_rate_bps = 10'000'000'000ULL;
    double oversubscription = 5.0;
    SimTime hop_delay_us = 50;
    std::uint32_t buffer_pkts = 0;  // 0: intra-rack bandwidth-delay product
    std::uint32_t host_buffer_pkts = 10000;
};

/// AQM applied to switch egress ports. DCTCP's K is chosen per port rate
/// unless `dctcp_k_override` is non-zero.
struct FabricAqm {
    AqmPolicy policy;
    std::uint32_t dctcp_k_override = 0;
};

std::uint32_t default_dctcp_k(std::uint64_t rate_bps);

class Topology {
  public:
    virtual ~Topology() = default;

    virtual std::size_t host_count() const = 0;
    /// Creates switches and ports. `host_entities[i]` receives packets
    /// destined to host i.
    virtual void build(Network& net, const std::vector<EntityId>& host_entities,
                       const FabricAqm& aqm, const RngFactory& rngs) = 0;
    /// Ordered egress ports from src to dst. Throws ConfigError for unknown
    /// hosts.
    virtual std::vector<PortId> route(HostId src, HostId dst, const FlowTuple& tuple) const = 0;
    /// Unloaded RTT of the longest host pair (data frame + pure ACK), µs.
    virtual double base_rtt_us() const = 0;
    /// Denominator for offered-load normalization (bits/s).
    virtual double load_capacity_bps() const = 0;
    virtual std::uint64_t host_rate_bps() const = 0;
    virtual std::string describe() const = 0;
    /// Hosts that share the first-hop switch with `h`.
    virtual std::uint32_t rack_of(HostId h) const = 0;
};

/// n senders and one receiver (host index n_senders) behind a single switch;
/// the switch port toward the receiver is the bottleneck.
class Dumbbell final : public Topology {
  public:
    explicit Dumbbell(DumbbellSpec spec);

    std::size_t host_count() const override { return spec_.n_senders + 1; }
    HostId receiver() const { return spec_.n_senders; }
    void build(Network& net, const std::vector<EntityId>& host_entities, const FabricAqm& aqm,
               const RngFactory& rngs) override;
    std::vector<PortId> route(HostId src, HostId dst, const FlowTuple& tuple) const override;
    double base_rtt_us() const override { return static_cast<double>(spec_.rtt_us); }
    double load_capacity_bps() const override { return static_cast<double>(spec_.bottleneck_rate_bps); }
    std::uint64_t host_rate_bps() const override { return spec_.host_rate_bps; }
    std::string describe() const override;
    std::uint32_t rack_of(HostId) const override { return 0; }

    PortId bottleneck_port() const { return to_receiver_; }
    std::uint64_t propagation_ps() const { return prop_ps_; }

  private:
    DumbbellSpec spec_;
    std::uint64_t prop_ps_ = 0;
    std::vector<PortId> nic_;   // host i -> switch
    std::vector<PortId> down_;  // switch -> host i
    PortId to_receiver_ = 0;
};

class LeafSpine final : public Topology {
  public:
    explicit LeafSpine(LeafSpineSpec spec);

    std::size_t host_count() const override {
        return static_cast<std::size_t>(spec_.n_leaf) * spec_.hosts_per_leaf;
    }
    void build(Network& net, const std::vector<EntityId>& host_entities, const FabricAqm& aqm,
               const RngFactory& rngs) override;
    std::vector<PortId> route(HostId src, HostId dst, const FlowTuple& tuple) const override;
    double base_rtt_us() const override;
    double load_capacity_bps() const override;
    std::uint64_t host_rate_bps() const override { return spec_.host_rate_bps; }
    std::string describe() const override;
    std::uint32_t rack_of(HostId h) const override { return h / spec_.hosts_per_leaf; }

    std::uint64_t uplink_rate_bps() const { return uplink_bps_; }
    std::uint32_t buffer_pkts() const { return buffer_pkts_; }
    /// Per-flow ECMP: spine chosen by a deterministic hash of the 4-tuple.
    std::uint32_t spine_for(const FlowTuple& t) const;

  private:
    LeafSpineSpec spec_;
    std::uint64_t uplink_bps_ = 0;
    std::uint32_t buffer_pkts_ = 0;
    std::vector<PortId> nic_;         // host -> leaf
    std::vector<PortId> down_;        // leaf -> host
    std::vector<PortId> up_;          // [leaf * n_spine + spine]
    std::vector<PortId> spine_down_;  // [spine * n_leaf + leaf]
};

}  // namespace tracks
