#include "tracks/tcp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace tracks {

std::uint64_t payload_digest(std::uint32_t flow_id, std::uint64_t offset, std::uint32_t len) {
    return mix64(mix64(flow_id) ^ offset) ^ len;
}

// ---------------------------------------------------------------------------
// Sender
// ---------------------------------------------------------------------------

TcpSender::TcpSender(TcpServices& svc, const TcpConfig& cfg, std::uint32_t flow_id, FlowTuple tuple,
                     std::uint32_t isn, std::uint32_t timer_id)
    : svc_(svc),
      cfg_(cfg),
      flow_id_(flow_id),
      tuple_(tuple),
      isn_(isn),
      timer_id_(timer_id),
      cwnd_(std::max(1.0, cfg.init_cwnd)),
      rto_base_(std::max(cfg.rto_initial, cfg.rto_min)) {}

std::uint32_t TcpSender::wire_seq(std::uint64_t offset) const {
    return isn_ + 1u + static_cast<std::uint32_t>(offset);
}

SimTime TcpSender::rto() const {
    SimTime r = rto_base_;
    for (std::uint32_t i = 0; i < backoff_ && r < cfg_.rto_max; ++i) r *= 2;
    return std::min(r, cfg_.rto_max);
}

Segment TcpSender::base_segment() const {
    Segment s;
    s.tuple = tuple_;
    s.flow_id = flow_id_;
    if (cfg_.timestamps) {
        s.has_ts = true;
        s.ts_val = static_cast<std::uint32_t>(now());
        s.ts_ecr = ts_recent_;
    }
    return s;
}

void TcpSender::connect() {
    if (syn_sent_) return;
    syn_sent_ = true;
    send_syn();
}

void TcpSender::send_syn() {
    Segment s = base_segment();
    s.flags = tcp_flags::kSyn;
    s.seq = isn_;
    s.sack_permitted = cfg_.sack;
    syn_tx_time_ = now();
    ++segments_sent_;
    svc_.emit(s);
    deadline_ = now() + rto();
    schedule_timer(deadline_);
}

void TcpSender::app_send(std::uint64_t bytes) {
    app_end_ += bytes;
    send_available();
}

void TcpSender::close() {
    closed_ = true;
    check_complete();
}

std::optional<std::uint64_t> TcpSender::unwrap_ack(std::uint32_t ack) const {
    const auto d = static_cast<std::int32_t>(ack - wire_seq(snd_una_));
    if (d < 0) return std::nullopt;
    return snd_una_ + static_cast<std::uint64_t>(d);
}

TcpSender::SentSeg* TcpSender::find_seg(std::uint64_t offset) {
    if (segs_.empty() || offset < segs_.front().start) return nullptr;
    const auto idx = static_cast<std::size_t>((offset - segs_.front().start) / cfg_.mss);
    if (idx >= segs_.size() || segs_[idx].start != offset) return nullptr;
    return &segs_[idx];
}

std::uint32_t TcpSender::flight_segments() const { return static_cast<std::uint32_t>(segs_.size()); }

std::uint32_t TcpSender::pipe_segments() const {
    if (!peer_sack_) {
        return static_cast<std::uint32_t>((snd_nxt_ - snd_una_ + cfg_.mss - 1) / cfg_.mss);
    }
    std::uint32_t n = 0;
    for (const auto& s : segs_) {
        if (s.start >= snd_nxt_) break;
        if (!s.sacked) ++n;
    }
    return n;
}

void TcpSender::set_cwnd(double c) {
    cwnd_ = std::max(1.0, c);
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(cwnd_));
    std::memcpy(&bits, &cwnd_, sizeof(bits));
    cwnd_hash_ = mix64(cwnd_hash_ ^ bits ^ mix64(now()));
    if (Observer* o = obs()) o->on_cwnd(flow_id_, cwnd_, now());
}

void TcpSender::transmit(SentSeg& s, bool rtx) {
    Segment seg = base_segment();
    seg.flags = tcp_flags::kAck;
    seg.seq = wire_seq(s.start);
    seg.payload_len = s.len;
    seg.ect = cfg_.ecn();
    if (cwr_pending_) {
        seg.cwr = true;
        cwr_pending_ = false;
    }
    seg.digest = payload_digest(flow_id_, s.start, s.len);
    seg.retransmission = rtx;
    seg.tx_window_pos = s.pos;
    seg.tx_cwnd = s.cwnd_at_tx;
    s.tx_time = now();
    if (rtx) {
        s.retransmitted = true;
        ++retransmissions_;
    }
    ++segments_sent_;
    svc_.emit(seg);
    if (deadline_ == 0) rearm_timer();
}

void TcpSender::send_available() {
    if (!established_ || complete_) return;
    while (snd_nxt_ < app_end_) {
        if (pipe_segments() >= static_cast<std::uint32_t>(std::floor(cwnd_))) break;
        if (snd_nxt_ < snd_max_) {
            SentSeg* s = find_seg(snd_nxt_);
            if (!s) break;
            snd_nxt_ += s->len;
            if (s->sacked) continue;
            transmit(*s, true);
            note_retransmit(*s);
            continue;
        }
        SentSeg s{};
        s.start = snd_max_;
        s.len = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.mss, app_end_ - snd_max_));
        s.pos = static_cast<std::uint16_t>(
            std::min<std::uint64_t>(UINT16_MAX, (snd_max_ - snd_una_) / cfg_.mss + 1));
        s.cwnd_at_tx = static_cast<std::uint16_t>(
            std::clamp(std::floor(cwnd_), 1.0, static_cast<double>(UINT16_MAX)));
        segs_.push_back(s);
        snd_max_ += s.len;
        snd_nxt_ = snd_max_;
        transmit(segs_.back(), false);
    }
}

void TcpSender::retransmit_next_hole() {
    for (auto& s : segs_) {
        if (s.start + s.len > max_sack_left_) break;
        if (s.sacked || s.rtx_this_recovery) continue;
        s.rtx_this_recovery = true;
        transmit(s, true);
        note_retransmit(s);
        return;
    }
}

void TcpSender::schedule_timer(SimTime at) {
    if (!pending_at_ || at < *pending_at_) {
        ++timer_gen_;
        pending_at_ = at;
        svc_.set_timer(timer_id_, at, timer_gen_);
    }
}

void TcpSender::rearm_timer() {
    if (segs_.empty()) {
        disarm_timer();
        return;
    }
    // The timer runs from the last transmission of the oldest outstanding
    // segment, so a retransmission by timeout happens exactly one RTO after
    // the lost segment left. A timeout restarts the clock for everything
    // still waiting to be resent.
    const SimTime base = std::max(segs_.front().tx_time, last_rto_at_);
    deadline_ = std::max(base + rto(), now());
    schedule_timer(deadline_);
}

void TcpSender::disarm_timer() { deadline_ = 0; }

void TcpSender::on_timer(std::uint64_t token) {
    if (token != timer_gen_) return;
    pending_at_.reset();
    if (deadline_ == 0 || complete_) return;
    if (now() < deadline_) {
        schedule_timer(deadline_);
        return;
    }
    deadline_ = 0;
    on_rto();
}

void TcpSender::on_rto() {
    if (!established_) {
        ++rto_events_;
        RecoveryEvent ev;
        ev.flow_id = flow_id_;
        ev.kind = RecoveryKind::Rto;
        ev.cwnd_mss = 1;
        ev.loss_index_fraction = 1;
        ev.burst_fraction = 1;
        ev.recovery_duration = now() - syn_tx_time_;
        recoveries_.push_back(ev);
        ++backoff_;
        syn_retransmitted_ = true;
        send_syn();
        return;
    }
    if (segs_.empty()) return;

    ++rto_events_;
    last_rto_at_ = now();
    close_recovery();
    open_recovery(RecoveryKind::Rto, segs_.front());
    ssthresh_ = std::max(flight_segments() / 2.0, 2.0);
    set_cwnd(1.0);
    in_recovery_ = false;
    dupacks_ = 0;
    dupack_spoofed_ = false;
    rto_recovery_ = true;
    rto_recover_ = snd_max_;
    recover_ = snd_max_;
    for (auto& s : segs_) s.sacked = false;
    max_sack_left_ = snd_una_;
    ++backoff_;
    snd_nxt_ = snd_una_;
    send_available();
    rearm_timer();
}

void TcpSender::rtt_sample(double us) {
    if (us <= 0) us = 1;
    if (!has_rtt_) {
        srtt_ = us;
        rttvar_ = us / 2;
        has_rtt_ = true;
    } else {
        rttvar_ = 0.75 * rttvar_ + 0.25 * std::fabs(srtt_ - us);
        srtt_ = 0.875 * srtt_ + 0.125 * us;
    }
    const double r = srtt_ + std::max(1.0, 4.0 * rttvar_);
    rto_base_ = std::clamp(static_cast<SimTime>(std::ceil(r)), cfg_.rto_min, cfg_.rto_max);
}

bool TcpSender::process_ecn(const Segment& seg, std::uint64_t acked, bool new_ack) {
    if (!cfg_.ecn()) return false;
    const bool can_reduce = !in_recovery_ && (ecn_cwr_point_ == 0 || snd_una_ > ecn_cwr_point_);
    if (cfg_.variant == TcpVariant::Dctcp) {
        if (new_ack) {
            dctcp_acked_ += acked;
            if (seg.ece) dctcp_ce_ += acked;
            if (snd_una_ >= dctcp_window_end_) {
                if (dctcp_acked_ > 0) {
                    const double f = static_cast<double>(dctcp_ce_) / static_cast<double>(dctcp_acked_);
                    dctcp_alpha_ = (1.0 - cfg_.dctcp_g) * dctcp_alpha_ + cfg_.dctcp_g * f;
                    dctcp_alpha_ = std::clamp(dctcp_alpha_, 0.0, 1.0);
                }
                dctcp_acked_ = dctcp_ce_ = 0;
                dctcp_window_end_ = snd_max_;
            }
        }
        if (seg.ece && can_reduce) {
            const double reduced = cwnd_ * (1.0 - dctcp_alpha_ / 2.0);
            ssthresh_ = std::max(reduced, 2.0);
            set_cwnd(reduced);
            ecn_cwr_point_ = snd_max_;
            cwr_pending_ = true;
            return true;
        }
        return false;
    }
    if (seg.ece && can_reduce) {
        ssthresh_ = std::max(cwnd_ / 2.0, 2.0);
        set_cwnd(ssthresh_);
        ecn_cwr_point_ = snd_max_;
        cwr_pending_ = true;
        return true;
    }
    return false;
}

void TcpSender::update_sack(const Segment& seg) {
    for (std::uint8_t i = 0; i < seg.sack_count; ++i) {
        const auto& b = seg.sack_blocks[i];
        const auto dl = static_cast<std::int32_t>(b.left - wire_seq(snd_una_));
        const auto dr = static_cast<std::int32_t>(b.right - wire_seq(snd_una_));
        if (dl < 0 || dr <= dl) continue;
        const std::uint64_t l = snd_una_ + static_cast<std::uint64_t>(dl);
        const std::uint64_t r = snd_una_ + static_cast<std::uint64_t>(dr);
        if (r > snd_max_) continue;
        max_sack_left_ = std::max(max_sack_left_, l);
        for (auto& s : segs_) {
            if (s.start >= r) break;
            if (s.start >= l && s.start + s.len <= r) s.sacked = true;
        }
    }
}

void TcpSender::open_recovery(RecoveryKind kind, const SentSeg& head) {
    OpenRecovery r;
    r.kind = kind;
    r.first_start = head.start;
    r.last_start = head.start;
    r.cwnd_at_tx = std::max<double>(1.0, head.cwnd_at_tx);
    r.pos = std::min(1.0, static_cast<double>(head.pos) / r.cwnd_at_tx);
    r.duration = now() - head.tx_time;
    recovery_ = r;
    for (auto& s : segs_) s.rtx_this_recovery = false;
}

void TcpSender::note_retransmit(const SentSeg& s) {
    if (recovery_) {
        recovery_->first_start = std::min(recovery_->first_start, s.start);
        recovery_->last_start = std::max(recovery_->last_start, s.start);
    }
    if (Observer* o = obs()) {
        o->on_retransmit(flow_id_, s.start, recovery_ && recovery_->kind == RecoveryKind::Rto, now());
    }
}

void TcpSender::close_recovery() {
    if (!recovery_) return;
    const auto& r = *recovery_;
    RecoveryEvent ev;
    ev.flow_id = flow_id_;
    ev.kind = r.kind;
    ev.cwnd_mss = r.cwnd_at_tx;
    ev.loss_index_fraction = r.pos;
    const double span = static_cast<double>((r.last_start - r.first_start) / cfg_.mss + 1);
    ev.burst_fraction = std::min(1.0, span / r.cwnd_at_tx);
    ev.recovery_duration = r.duration;
    recoveries_.push_back(ev);
    recovery_.reset();
}

void TcpSender::finalize() { close_recovery(); }

void TcpSender::check_complete() {
    if (complete_ || !closed_ || !established_ || snd_una_ < app_end_) return;
    complete_ = true;
    close_recovery();
    disarm_timer();
    Segment fin = base_segment();
    fin.flags = tcp_flags::kFin | tcp_flags::kAck;
    fin.seq = wire_seq(app_end_);
    svc_.emit(fin);
    svc_.flow_completed(flow_id_);
}

std::uint64_t TcpSender::expected_stream_hash(std::uint64_t bytes) const {
    std::uint64_t h = 0;
    for (std::uint64_t off = 0; off < bytes; off += cfg_.mss) {
        const auto len = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.mss, bytes - off));
        h = fold_stream(h, payload_digest(flow_id_, off, len));
    }
    return h;
}

void TcpSender::on_ack(const Segment& seg) {
    if (complete_) return;
    if (seg.spoofed) ++spoofed_acks_;
    if (Observer* o = obs()) o->on_sender_ack(flow_id_, seg, now());
    if (!seg.has_ack()) return;

    if (!established_) {
        if (!seg.syn() || seg.ack != isn_ + 1) return;
        established_ = true;
        peer_sack_ = cfg_.sack && seg.sack_permitted;
        if (cfg_.timestamps && seg.has_ts) {
            ts_recent_ = seg.ts_val;
            ts_recent_set_ = true;
        }
        if (cfg_.timestamps && seg.has_ts && seg.ts_ecr != 0) {
            rtt_sample(static_cast<double>(static_cast<std::uint32_t>(now()) - seg.ts_ecr));
        } else if (!syn_retransmitted_) {
            rtt_sample(static_cast<double>(now() - syn_tx_time_));
        }
        backoff_ = 0;
        disarm_timer();
        max_sack_left_ = 0;
        send_available();
        check_complete();
        return;
    }
    if (seg.syn()) return;

    if (cfg_.timestamps && seg.has_ts) {
        if (ts_recent_set_ && seq_lt(seg.ts_val, ts_recent_)) {
            ++paws_drops_;
            return;
        }
        ts_recent_ = seg.ts_val;
        ts_recent_set_ = true;
    }

    const auto off = unwrap_ack(seg.ack);
    if (!off) return;  // old ACK
    if (*off > snd_max_) {
        ++invalid_acks_;
        return;
    }
    if (peer_sack_) update_sack(seg);

    if (*off > snd_una_) {
        const std::uint64_t acked = *off - snd_una_;
        if (cfg_.timestamps && seg.has_ts && seg.ts_ecr != 0) {
            rtt_sample(static_cast<double>(static_cast<std::uint32_t>(now()) - seg.ts_ecr));
        } else {
            const SentSeg* newest = nullptr;
            for (const auto& s : segs_) {
                if (s.start + s.len > *off) break;
                newest = &s;
            }
            if (newest && !newest->retransmitted) rtt_sample(static_cast<double>(now() - newest->tx_time));
        }
        while (!segs_.empty() && segs_.front().start + segs_.front().len <= *off) segs_.pop_front();
        snd_una_ = *off;
        if (snd_nxt_ < snd_una_) snd_nxt_ = snd_una_;
        max_sack_left_ = std::max(max_sack_left_, snd_una_);
        backoff_ = 0;

        const bool reduced = process_ecn(seg, acked, true);
        if (in_recovery_) {
            if (snd_una_ >= recover_) {
                in_recovery_ = false;
                dupacks_ = 0;
                dupack_spoofed_ = false;
                set_cwnd(ssthresh_);
                close_recovery();
            } else {
                // NewReno partial ACK: repair the next hole, deflate by the
                // amount acknowledged and add back one segment.
                if (peer_sack_) {
                    retransmit_next_hole();
                } else if (!segs_.empty()) {
                    transmit(segs_.front(), true);
                    note_retransmit(segs_.front());
                }
                set_cwnd(cwnd_ - static_cast<double>(acked) / cfg_.mss + 1.0);
            }
        } else {
            dupacks_ = 0;
            dupack_spoofed_ = false;
            if (!reduced) {
                if (cwnd_ < ssthresh_) {
                    set_cwnd(cwnd_ + 1.0);
                } else {
                    set_cwnd(cwnd_ + 1.0 / cwnd_);
                }
            }
        }
        if (rto_recovery_ && snd_una_ >= rto_recover_) {
            rto_recovery_ = false;
            close_recovery();
        }
        check_complete();
        if (complete_) return;
        send_available();
        rearm_timer();
        return;
    }

    if (*off != snd_una_ || seg.payload_len != 0 || snd_max_ == snd_una_) return;

    // Duplicate ACK.
    process_ecn(seg, 0, false);
    if (peer_sack_ && seg.sack_count == 0) return;
    ++dupacks_;
    if (seg.spoofed) dupack_spoofed_ = true;
    if (in_recovery_) {
        set_cwnd(cwnd_ + 1.0);
        if (peer_sack_) retransmit_next_hole();
        send_available();
        return;
    }
    if (dupacks_ == cfg_.dupack_threshold && !rto_recovery_) {
        const double flight = flight_segments();
        ssthresh_ = std::max(flight / 2.0, 2.0);
        recover_ = snd_max_;
        in_recovery_ = true;
        ++frr_events_;
        if (dupack_spoofed_) ++rack_frr_events_;
        if (Observer* o = obs()) o->on_fast_retransmit(flow_id_, flight, ssthresh_, now());
        close_recovery();
        SentSeg& head = segs_.front();
        open_recovery(RecoveryKind::Frr, head);
        head.rtx_this_recovery = true;
        transmit(head, true);
        note_retransmit(head);
        set_cwnd(ssthresh_ + cfg_.dupack_threshold);
        rearm_timer();
        send_available();
    }
}

// ---------------------------------------------------------------------------
// Receiver
// ---------------------------------------------------------------------------

TcpReceiver::TcpReceiver(TcpServices& svc, const TcpConfig& cfg, std::uint32_t flow_id, FlowTuple tuple,
                         std::uint32_t timer_id)
    : svc_(svc), cfg_(cfg), flow_id_(flow_id), tuple_(tuple), timer_id_(timer_id) {
    iss_ = static_cast<std::uint32_t>(mix64(0x5eedULL ^ flow_id));
}

std::size_t TcpReceiver::out_of_order_ranges() const {
    std::size_t n = 0;
    std::uint64_t end = 0;
    bool first = true;
    for (const auto& [off, h] : ooo_) {
        if (first || off != end) ++n;
        first = false;
        end = off + h.len;
    }
    return n;
}

Segment TcpReceiver::make_ack() {
    Segment a;
    a.tuple = tuple_;
    a.flow_id = flow_id_;
    a.flags = tcp_flags::kAck;
    a.seq = iss_ + 1;
    a.ack = irs_ + 1 + static_cast<std::uint32_t>(rcv_nxt_);
    if (peer_ts_) {
        a.has_ts = true;
        a.ts_val = static_cast<std::uint32_t>(svc_.now());
        a.ts_ecr = ts_recent_;
    }
    if (cfg_.ecn()) a.ece = cfg_.variant == TcpVariant::Dctcp ? last_ce_ : ece_latch_;
    if (peer_sack_ && !ooo_.empty()) {
        // Contiguous received ranges above rcv_nxt.
        std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
        for (const auto& [off, h] : ooo_) {
            if (!ranges.empty() && ranges.back().second == off) {
                ranges.back().second = off + h.len;
            } else {
                ranges.emplace_back(off, off + h.len);
            }
        }
        std::vector<std::size_t> chosen;
        auto add = [&](std::size_t idx) {
            if (chosen.size() >= 3) return;
            if (std::find(chosen.begin(), chosen.end(), idx) != chosen.end()) return;
            chosen.push_back(idx);
        };
        for (const auto start : recent_) {
            for (std::size_t i = 0; i < ranges.size(); ++i) {
                if (start >= ranges[i].first && start < ranges[i].second) add(i);
            }
        }
        for (std::size_t i = 0; i < ranges.size(); ++i) add(i);
        const std::uint32_t base = irs_ + 1;
        for (const auto i : chosen) {
            a.add_sack({base + static_cast<std::uint32_t>(ranges[i].first),
                        base + static_cast<std::uint32_t>(ranges[i].second)});
        }
    }
    return a;
}

void TcpReceiver::emit_ack(Segment ack) {
    ++acks_sent_;
    svc_.emit(ack);
}

void TcpReceiver::on_segment(const Segment& seg) {
    if (seg.syn() && !seg.has_ack()) {
        if (!established_) {
            established_ = true;
            irs_ = seg.seq;
            peer_ts_ = cfg_.timestamps && seg.has_ts;
            peer_sack_ = cfg_.sack && seg.sack_permitted;
        }
        if (peer_ts_) ts_recent_ = seg.ts_val;
        Segment a = make_ack();
        a.flags = tcp_flags::kSyn | tcp_flags::kAck;
        a.seq = iss_;
        a.ack = irs_ + 1;
        a.sack_permitted = peer_sack_;
        a.ece = false;
        emit_ack(a);
        return;
    }
    if (seg.fin() || !established_ || seg.payload_len == 0) return;
    if (auto a = on_data(seg)) emit_ack(*a);
}

std::optional<Segment> TcpReceiver::on_data(const Segment& seg) {
    const std::uint32_t expected = irs_ + 1 + static_cast<std::uint32_t>(rcv_nxt_);
    const auto d = static_cast<std::int32_t>(seg.seq - expected);

    bool ce_changed = false;
    if (cfg_.ecn()) {
        if (seg.cwr) ece_latch_ = false;
        if (seg.ce) ece_latch_ = true;
        ce_changed = seg.ce != last_ce_;
        last_ce_ = seg.ce;
    }

    if (d < 0) {
        ++duplicates_;
        unacked_ = 0;
        return make_ack();
    }

    const std::uint64_t off = rcv_nxt_ + static_cast<std::uint64_t>(d);
    if (d > 0) {
        if (ooo_.count(off)) {
            ++duplicates_;
        } else {
            ooo_.emplace(off, Held{seg.payload_len, seg.digest});
        }
        recent_.erase(std::remove(recent_.begin(), recent_.end(), off), recent_.end());
        recent_.push_front(off);
        if (recent_.size() > 8) recent_.pop_back();
        unacked_ = 0;
        return make_ack();
    }

    if (peer_ts_) ts_recent_ = seg.ts_val;
    const bool filled_hole = !ooo_.empty();
    stream_hash_ = fold_stream(stream_hash_, seg.digest);
    rcv_nxt_ += seg.payload_len;
    while (!ooo_.empty() && ooo_.begin()->first <= rcv_nxt_) {
        auto it = ooo_.begin();
        if (it->first == rcv_nxt_) {
            stream_hash_ = fold_stream(stream_hash_, it->second.digest);
            rcv_nxt_ += it->second.len;
        }
        ooo_.erase(it);
    }
    recent_.erase(std::remove_if(recent_.begin(), recent_.end(),
                                 [&](std::uint64_t s) { return s < rcv_nxt_; }),
                  recent_.end());

    if (cfg_.delayed_ack && !filled_hole && ooo_.empty() && !ce_changed) {
        if (++unacked_ < 2) {
            svc_.set_timer(timer_id_, svc_.now() + cfg_.delayed_ack_timeout, ++delack_gen_);
            return std::nullopt;
        }
    }
    unacked_ = 0;
    ++delack_gen_;
    return make_ack();
}

void TcpReceiver::on_timer(std::uint64_t token) {
    if (token != delack_gen_ || unacked_ == 0) return;
    unacked_ = 0;
    emit_ack(make_ack());
}

}  // namespace tracks
