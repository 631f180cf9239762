#include "tracks/shim.hpp"

#include <algorithm>
#include <cmath>

namespace tracks {

ShimCounters& ShimCounters::operator+=(const ShimCounters& o) {
    spoofed_acks_sent += o.spoofed_acks_sent;
    dupacks_dropped += o.dupacks_dropped;
    episodes_opened += o.episodes_opened;
    episodes_stopped_at_rtomin += o.episodes_stopped_at_rtomin;
    flows_tracked += o.flows_tracked;
    flows_marked_long_lived += o.flows_marked_long_lived;
    untracked_flows += o.untracked_flows;
    return *this;
}

std::uint64_t hash_flow_key(const FlowKey& k) {
    const std::uint64_t ips = (static_cast<std::uint64_t>(k.src_ip) << 32) | k.dst_ip;
    const std::uint64_t ports = (static_cast<std::uint64_t>(k.src_port) << 16) | k.dst_port;
    return mix64(ips ^ mix64(ports + 0x9e3779b97f4a7c15ULL));
}

// ---------------------------------------------------------------------------

FlowTable::FlowTable(std::uint32_t capacity)
    : pool_(capacity), next_(capacity, -1), live_(capacity, 0) {
    std::uint32_t nb = 1;
    while (nb < capacity) nb <<= 1;
    buckets_.assign(nb, -1);
    free_.reserve(capacity);
    for (std::uint32_t i = capacity; i-- > 0;) free_.push_back(static_cast<std::int32_t>(i));
}

std::uint32_t FlowTable::bucket_of(const FlowKey& k) const {
    return static_cast<std::uint32_t>(hash_flow_key(k) & (buckets_.size() - 1));
}

FlowEntry* FlowTable::find(const FlowKey& k) {
    if (pool_.empty()) return nullptr;
    for (std::int32_t i = buckets_[bucket_of(k)]; i >= 0; i = next_[i]) {
        if (pool_[i].key == k) return &pool_[i];
    }
    return nullptr;
}

FlowEntry* FlowTable::insert(const FlowKey& k) {
    if (FlowEntry* e = find(k)) return e;
    if (free_.empty()) return nullptr;
    const std::int32_t i = free_.back();
    free_.pop_back();
    const auto b = bucket_of(k);
    pool_[i] = FlowEntry{};
    pool_[i].key = k;
    next_[i] = buckets_[b];
    buckets_[b] = i;
    live_[i] = 1;
    ++used_;
    return &pool_[i];
}

bool FlowTable::erase(const FlowKey& k) {
    if (pool_.empty()) return false;
    const auto b = bucket_of(k);
    std::int32_t* link = &buckets_[b];
    while (*link >= 0) {
        const std::int32_t i = *link;
        if (pool_[i].key == k) {
            *link = next_[i];
            next_[i] = -1;
            live_[i] = 0;
            free_.push_back(i);
            --used_;
            return true;
        }
        link = &next_[i];
    }
    return false;
}

// ---------------------------------------------------------------------------

TracksShim::TracksShim(const ShimConfig& cfg, HostId host, RngStream rng, Observer* obs)
    : cfg_(cfg), host_(host), rng_(rng), obs_(obs), table_(cfg.table_size) {}

void TracksShim::reset_entry(FlowEntry& e, const Segment& seg, SimTime now) {
    const FlowKey key = e.key;
    e = FlowEntry{};
    e.key = key;
    e.active = true;
    e.active_time = now;
    e.flow_id = seg.flow_id;
    e.has_ts = seg.has_ts;
    if (seg.syn()) {
        e.isn = seg.seq;
        e.sack_permitted = seg.sack_permitted;
    } else {
        // Reactivated mid-stream: count acked bytes from here on.
        e.isn = seg.seq - 1;
    }
    e.last_seq_sent = seg.seq;
}

void TracksShim::on_outgoing(const Segment& seg, SimTime now) {
    if (!cfg_.enabled) return;
    if (seg.fin()) {
        table_.erase(seg.tuple);
        return;
    }
    const bool syn = seg.syn() && !seg.has_ack();
    if (!syn && seg.payload_len == 0) return;

    FlowEntry* e = table_.find(seg.tuple);
    if (!e) {
        e = table_.insert(seg.tuple);
        if (!e) {
            ++counters_.untracked_flows;
            return;
        }
        ++counters_.flows_tracked;
        reset_entry(*e, seg, now);
    } else if (syn || !e->active) {
        reset_entry(*e, seg, now);
    }
    if (seg.payload_len > 0) {
        e->last_seq_sent = seg.seq + seg.payload_len;
        e->active_time = now;
    }
}

IncomingVerdict TracksShim::on_incoming(Segment& seg, SimTime now) {
    if (!cfg_.enabled) return IncomingVerdict::Pass;
    if (!seg.has_ack() || seg.payload_len > 0 || seg.fin()) return IncomingVerdict::Pass;
    FlowEntry* e = table_.find(seg.tuple.reversed());
    if (!e || !e->active || e->long_lived) return IncomingVerdict::Pass;

    if (seg.has_ts) {
        e->has_ts = true;
        e->ts_recent = seg.ts_val;
        e->ts_ecr = seg.ts_ecr;
    }
    e->peer_seq = seg.seq;
    if (seg.sack_count > 0 || (seg.syn() && seg.sack_permitted && e->sack_permitted)) e->sack_seen = true;

    const bool was_open = e->resent > 0;
    if (!e->ack_seen || seq_gt(seg.ack, e->last_ack_no)) {
        if (seg.has_ts && seg.ts_ecr != 0) {
            const double sample = static_cast<double>(static_cast<std::uint32_t>(now) - seg.ts_ecr);
            e->rtt_est = e->rtt_est > 0 ? 0.875 * e->rtt_est + 0.125 * sample : std::max(sample, 1.0);
        }
        e->last_ack_no = seg.ack;
        e->dup_ack_nr = 0;
        e->ack_time = now;
        e->ack_seen = true;
        e->resent = 0;
        e->x = 2;
        e->halted = false;
        e->episode_spoofs = 0;
        const std::uint32_t acked = seg.ack - e->isn - 1;
        if (cfg_.gamma != kGammaInfinite && acked >= cfg_.gamma) {
            e->long_lived = true;
            ++counters_.flows_marked_long_lived;
            if (obs_) obs_->on_long_lived(host_, e->key, now);
        }
        if (obs_) obs_->on_incoming_ack(host_, e->key, false, was_open, IncomingVerdict::Pass, now);
        return IncomingVerdict::Pass;
    }
    if (seg.syn() || seg.ack != e->last_ack_no) return IncomingVerdict::Pass;

    ++e->dup_ack_nr;
    IncomingVerdict v = IncomingVerdict::Pass;
    if (was_open) {
        ++counters_.dupacks_dropped;
        v = IncomingVerdict::Drop;
    } else if (e->sack_seen && seg.sack_count == 0) {
        seg.add_sack({e->last_ack_no + kDefaultMss, e->last_ack_no + kDefaultMss + kFakeSackWidth});
        v = IncomingVerdict::PassRewritten;
    }
    if (obs_) obs_->on_incoming_ack(host_, e->key, true, was_open, v, now);
    return v;
}

Segment TracksShim::build_spoofed_ack(const FlowEntry& e) const {
    Segment s;
    s.tuple = e.key.reversed();
    s.flags = tcp_flags::kAck;
    s.seq = e.peer_seq;
    s.ack = e.last_ack_no;
    if (e.has_ts) {
        s.has_ts = true;
        s.ts_val = e.ts_recent;
        s.ts_ecr = e.ts_ecr;
    }
    if (e.sack_seen) {
        s.add_sack({e.last_ack_no + kDefaultMss, e.last_ack_no + kDefaultMss + kFakeSackWidth});
    }
    s.flow_id = e.flow_id;
    s.spoofed = true;
    return s;
}

std::vector<Segment> TracksShim::on_tick(SimTime now) {
    std::vector<Segment> out;
    if (!cfg_.enabled) return out;
    std::vector<FlowKey> expired;
    table_.for_each([&](FlowEntry& e) {
        const double rtt = rtt_of(e);
        const double beta = cfg_.alpha * rtt + rng_.uniform(0.0, rtt);
        const bool idle = now - e.active_time >= cfg_.inactivity_timeout;
        if (!e.active || e.long_lived || !e.ack_seen) {
            if (idle) expired.push_back(e.key);
            return;
        }
        const SimTime t = std::max(e.ack_time, e.active_time);
        if (e.resent == 0 && !e.halted && static_cast<double>(now - t) >= beta) {
            const std::uint32_t n = e.dup_ack_nr < cfg_.phi ? cfg_.phi - e.dup_ack_nr : 0;
            e.resent = 1;
            e.resent_time = now;
            e.x = 2;
            e.episode_spoofs = 0;
            ++counters_.episodes_opened;
            if (obs_) obs_->on_episode_open(host_, e.key, now, t, beta, rtt);
            for (std::uint32_t i = 0; i < n; ++i) {
                out.push_back(build_spoofed_ack(e));
                ++e.episode_spoofs;
                ++counters_.spoofed_acks_sent;
                if (obs_) obs_->on_spoof(host_, e.key, e.episode_spoofs, now);
            }
            return;
        }
        if (e.resent > 0 && static_cast<double>(now - e.resent_time) >= std::ldexp(beta, static_cast<int>(e.x))) {
            out.push_back(build_spoofed_ack(e));
            ++e.x;
            ++e.resent;
            ++e.episode_spoofs;
            ++counters_.spoofed_acks_sent;
            if (obs_) obs_->on_spoof(host_, e.key, e.episode_spoofs, now);
            return;
        }
        if (e.resent > 0 && now - e.ack_time >= cfg_.rto_min) {
            e.resent = 0;
            e.x = 2;
            e.halted = true;
            ++counters_.episodes_stopped_at_rtomin;
            if (obs_) obs_->on_episode_stop(host_, e.key, now);
            return;
        }
        if (idle) expired.push_back(e.key);
    });
    for (const auto& k : expired) table_.erase(k);
    return out;
}

}  // namespace tracks
