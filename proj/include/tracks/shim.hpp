// Per-host loss-recovery shim. It watches the segments a host's senders emit
// and the ACKs they get back; when a small flow has gone quiet for longer
// than β it injects duplicate ACKs toward the local sender so fast
// retransmit fires long before the sender's own RTO.
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "tracks/segment.hpp"
#include "tracks/sim.hpp"
#include "tracks/trace.hpp"

namespace tracks {

constexpr std::uint64_t kGammaInfinite = std::numeric_limits<std::uint64_t>::max();

struct ShimConfig {
    double alpha = 10;                        // RTTs of silence before spoofing
    std::uint64_t gamma = kGammaInfinite;     // acked bytes after which a flow is long-lived
    std::uint32_t phi = 3;                    // sender dupACK threshold
    SimTime rto_min = 200 * kMsec;
    SimTime tick_period = 1 * kMsec;
    SimTime inactivity_timeout = 1 * kSec;
    double default_rtt_us = 100;
    std::uint32_t table_size = 4096;
    bool enabled = true;
};

struct ShimCounters {
    std::uint64_t spoofed_acks_sent = 0;
    std::uint64_t dupacks_dropped = 0;
    std::uint64_t episodes_opened = 0;
    std::uint64_t episodes_stopped_at_rtomin = 0;
    std::uint64_t flows_tracked = 0;
    std::uint64_t flows_marked_long_lived = 0;
    std::uint64_t untracked_flows = 0;

    ShimCounters& operator+=(const ShimCounters& o);
};

/// The 4-tuple in the local-sender -> remote direction.
using FlowKey = FlowTuple;

std::uint64_t hash_flow_key(const FlowKey& k);

struct FlowEntry {
    FlowKey key;
    bool active = false;
    bool long_lived = false;
    bool ack_seen = false;
    bool halted = false;  // spoofing stopped at rto_min; cleared by the next new ACK
    std::uint32_t last_ack_no = 0;
    std::uint32_t dup_ack_nr = 0;
    SimTime ack_time = 0;
    SimTime active_time = 0;
    std::uint32_t last_seq_sent = 0;
    std::uint32_t resent = 0;
    SimTime resent_time = 0;
    std::uint32_t x = 2;
    double rtt_est = 0;  // 0: no sample yet
    bool has_ts = false;
    std::uint32_t ts_recent = 0;  // peer's latest TSval
    std::uint32_t ts_ecr = 0;     // latest echo seen on an ACK
    std::uint32_t peer_seq = 0;
    bool sack_permitted = false;  // offered on our SYN
    bool sack_seen = false;       // negotiated (peer agreed)
    std::uint32_t isn = 0;
    std::uint32_t flow_id = 0;
    std::uint32_t episode_spoofs = 0;
};

/// Fixed-capacity chained hash table over a preallocated entry pool.
class FlowTable {
  public:
    explicit FlowTable(std::uint32_t capacity);

    FlowEntry* find(const FlowKey& k);
    /// nullptr when the pool is exhausted.
    FlowEntry* insert(const FlowKey& k);
    bool erase(const FlowKey& k);
    std::uint32_t size() const { return used_; }
    std::uint32_t capacity() const { return static_cast<std::uint32_t>(pool_.size()); }

    /// Visits live entries in pool order (deterministic).
    template <class F>
    void for_each(F&& f) {
        for (std::uint32_t i = 0; i < pool_.size(); ++i) {
            if (live_[i]) f(pool_[i]);
        }
    }

  private:
    std::uint32_t bucket_of(const FlowKey& k) const;

    std::vector<FlowEntry> pool_;
    std::vector<std::int32_t> next_;
    std::vector<char> live_;
    std::vector<std::int32_t> buckets_;
    std::vector<std::int32_t> free_;
    std::uint32_t used_ = 0;
};

class TracksShim {
  public:
    TracksShim(const ShimConfig& cfg, HostId host, RngStream rng, Observer* obs = nullptr);

    /// Every segment a local endpoint sends passes through here unmodified.
    void on_outgoing(const Segment& seg, SimTime now);
    /// ACKs arriving for local senders. May rewrite `seg` in place.
    IncomingVerdict on_incoming(Segment& seg, SimTime now);
    /// Periodic scan; returns spoofed ACKs to hand to local senders in order.
    std::vector<Segment> on_tick(SimTime now);

    Segment build_spoofed_ack(const FlowEntry& e) const;

    void set_enabled(bool on) { cfg_.enabled = on; }
    bool enabled() const { return cfg_.enabled; }
    bool has_flows() const { return table_.size() > 0; }
    const ShimConfig& config() const { return cfg_; }
    const ShimCounters& counters() const { return counters_; }
    FlowTable& table() { return table_; }
    const FlowEntry* entry(const FlowKey& k) { return table_.find(k); }

  private:
    void reset_entry(FlowEntry& e, const Segment& seg, SimTime now);
    double rtt_of(const FlowEntry& e) const { return e.rtt_est > 0 ? e.rtt_est : cfg_.default_rtt_us; }

    ShimConfig cfg_;
    HostId host_;
    RngStream rng_;
    Observer* obs_;
    FlowTable table_;
    ShimCounters counters_;
};

}  // namespace tracks
