// TCP sender and receiver state machines: NewReno fast retransmit/recovery,
// RFC 6298 RTO with a configurable floor, ECN-Reno and DCTCP reactions,
// optional SACK and timestamps.
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "tracks/records.hpp"
#include "tracks/segment.hpp"
#include "tracks/sim.hpp"
#include "tracks/trace.hpp"

namespace tracks {

enum class TcpVariant : std::uint8_t { NewReno, NewRenoEcn, Dctcp };

struct TcpConfig {
    TcpVariant variant = TcpVariant::NewReno;
    std::uint32_t mss = kDefaultMss;
    double init_cwnd = 10;
    SimTime rto_min = 200 * kMsec;
    SimTime rto_initial = 200 * kMsec;  // before the first RTT sample
    SimTime rto_max = 60 * kSec;
    std::uint32_t dupack_threshold = 3;
    bool sack = false;
    bool timestamps = true;
    bool delayed_ack = false;
    SimTime delayed_ack_timeout = 40 * kMsec;
    double dctcp_g = 1.0 / 16.0;

    bool ecn() const { return variant != TcpVariant::NewReno; }
};

/// What an endpoint needs from the host it lives on.
class TcpServices {
  public:
    virtual ~TcpServices() = default;
    virtual SimTime now() const = 0;
    virtual void emit(const Segment& seg) = 0;
    virtual void set_timer(std::uint32_t timer_id, SimTime at, std::uint64_t token) = 0;
    virtual void flow_completed(std::uint32_t /*flow_id*/) {}
    virtual Observer* observer() const { return nullptr; }
};

/// Payload fingerprint of bytes [offset, offset+len) of a flow's stream.
std::uint64_t payload_digest(std::uint32_t flow_id, std::uint64_t offset, std::uint32_t len);
/// Order-sensitive fold used by both ends for stream integrity checks.
inline std::uint64_t fold_stream(std::uint64_t h, std::uint64_t digest) { return mix64(h + digest); }

class TcpSender {
  public:
    TcpSender(TcpServices& svc, const TcpConfig& cfg, std::uint32_t flow_id, FlowTuple tuple,
              std::uint32_t isn, std::uint32_t timer_id);

    /// Sends the SYN.
    void connect();
    /// Appends bytes to the send buffer.
    void app_send(std::uint64_t bytes);
    /// No more data will be written; the flow completes when all is acked.
    void close();

    void on_ack(const Segment& seg);
    void on_timer(std::uint64_t token);
    /// Closes any open recovery record (run end).
    void finalize();

    bool established() const { return established_; }
    bool complete() const { return complete_; }
    const FlowTuple& tuple() const { return tuple_; }
    std::uint32_t flow_id() const { return flow_id_; }
    std::uint32_t isn() const { return isn_; }

    double cwnd() const { return cwnd_; }
    double ssthresh() const { return ssthresh_; }
    bool in_recovery() const { return in_recovery_; }
    std::uint32_t dup_ack_count() const { return dupacks_; }
    SimTime rto() const;
    std::uint32_t rto_backoff_exponent() const { return backoff_; }
    double srtt() const { return srtt_; }
    double dctcp_alpha() const { return dctcp_alpha_; }
    std::uint64_t snd_una() const { return snd_una_; }
    std::uint64_t snd_nxt() const { return snd_nxt_; }
    std::uint64_t snd_max() const { return snd_max_; }
    std::uint32_t wire_seq(std::uint64_t offset) const;

    std::uint32_t rto_events() const { return rto_events_; }
    std::uint32_t frr_events() const { return frr_events_; }
    std::uint32_t rack_assisted_frr_events() const { return rack_frr_events_; }
    std::uint32_t spoofed_acks_received() const { return spoofed_acks_; }
    std::uint32_t invalid_acks() const { return invalid_acks_; }
    std::uint32_t paws_drops() const { return paws_drops_; }
    std::uint32_t segments_sent() const { return segments_sent_; }
    std::uint32_t retransmissions() const { return retransmissions_; }
    const std::vector<RecoveryEvent>& recoveries() const { return recoveries_; }
    std::uint64_t cwnd_trace_hash() const { return cwnd_hash_; }
    /// Stream fingerprint a receiver must reach for `bytes` delivered bytes.
    std::uint64_t expected_stream_hash(std::uint64_t bytes) const;

  private:
    struct SentSeg {
        std::uint64_t start;
        std::uint32_t len;
        SimTime tx_time;
        bool retransmitted;
        bool sacked;
        bool rtx_this_recovery;
        std::uint16_t pos;
        std::uint16_t cwnd_at_tx;
    };

    struct OpenRecovery {
        RecoveryKind kind;
        std::uint64_t first_start;
        std::uint64_t last_start;
        double cwnd_at_tx;
        double pos;
        SimTime duration;
    };

    SimTime now() const { return svc_.now(); }
    Observer* obs() const { return svc_.observer(); }
    std::optional<std::uint64_t> unwrap_ack(std::uint32_t ack) const;
    SentSeg* find_seg(std::uint64_t offset);
    std::uint32_t flight_segments() const;
    std::uint32_t pipe_segments() const;
    void send_syn();
    void transmit(SentSeg& s, bool rtx);
    void send_available();
    void retransmit_next_hole();
    void rearm_timer();
    void disarm_timer();
    void schedule_timer(SimTime at);
    void on_rto();
    void rtt_sample(double us);
    void set_cwnd(double c);
    bool process_ecn(const Segment& seg, std::uint64_t acked, bool new_ack);
    void update_sack(const Segment& seg);
    void open_recovery(RecoveryKind kind, const SentSeg& head);
    void note_retransmit(const SentSeg& s);
    void close_recovery();
    void check_complete();
    Segment base_segment() const;

    TcpServices& svc_;
    TcpConfig cfg_;
    std::uint32_t flow_id_;
    FlowTuple tuple_;
    std::uint32_t isn_;
    std::uint32_t timer_id_;

    bool syn_sent_ = false;
    bool established_ = false;
    bool closed_ = false;
    bool complete_ = false;
    SimTime syn_tx_time_ = 0;
    bool syn_retransmitted_ = false;

    std::uint64_t app_end_ = 0;
    std::uint64_t snd_una_ = 0;
    std::uint64_t snd_nxt_ = 0;
    std::uint64_t snd_max_ = 0;
    std::deque<SentSeg> segs_;

    double cwnd_;
    double ssthresh_ = 1e12;
    std::uint32_t dupacks_ = 0;
    bool dupack_spoofed_ = false;
    bool in_recovery_ = false;
    std::uint64_t recover_ = 0;
    bool rto_recovery_ = false;
    std::uint64_t rto_recover_ = 0;
    SimTime last_rto_at_ = 0;  // segments not resent since then are timed from here

    bool has_rtt_ = false;
    double srtt_ = 0;
    double rttvar_ = 0;
    SimTime rto_base_;
    std::uint32_t backoff_ = 0;

    SimTime deadline_ = 0;  // 0: disarmed
    std::optional<SimTime> pending_at_;
    std::uint64_t timer_gen_ = 0;

    bool ts_recent_set_ = false;
    std::uint32_t ts_recent_ = 0;

    bool cwr_pending_ = false;
    std::uint64_t ecn_cwr_point_ = 0;
    double dctcp_alpha_ = 1.0;
    std::uint64_t dctcp_window_end_ = 0;
    std::uint64_t dctcp_acked_ = 0;
    std::uint64_t dctcp_ce_ = 0;

    bool peer_sack_ = false;
    std::uint64_t max_sack_left_ = 0;

    std::optional<OpenRecovery> recovery_;
    std::vector<RecoveryEvent> recoveries_;

    std::uint32_t rto_events_ = 0, frr_events_ = 0, rack_frr_events_ = 0, spoofed_acks_ = 0;
    std::uint32_t invalid_acks_ = 0, paws_drops_ = 0, segments_sent_ = 0, retransmissions_ = 0;
    std::uint64_t cwnd_hash_ = 0;
};

class TcpReceiver {
  public:
    TcpReceiver(TcpServices& svc, const TcpConfig& cfg, std::uint32_t flow_id, FlowTuple tuple,
                std::uint32_t timer_id);

    /// Entry point for every segment addressed to this receiver; emits the
    /// resulting ACK (if any) through the services.
    void on_segment(const Segment& seg);
    /// Data path: returns the ACK to send now, or nothing when delayed.
    std::optional<Segment> on_data(const Segment& seg);
    void on_timer(std::uint64_t token);

    std::uint64_t delivered_bytes() const { return rcv_nxt_; }
    std::uint64_t stream_hash() const { return stream_hash_; }
    std::uint32_t duplicate_segments() const { return duplicates_; }
    std::uint32_t acks_sent() const { return acks_sent_; }
    bool established() const { return established_; }
    std::size_t out_of_order_ranges() const;

  private:
    Segment make_ack();
    void emit_ack(Segment ack);

    TcpServices& svc_;
    TcpConfig cfg_;
    std::uint32_t flow_id_;
    FlowTuple tuple_;  // receiver -> sender direction
    std::uint32_t timer_id_;

    bool established_ = false;
    std::uint32_t irs_ = 0;
    std::uint32_t iss_ = 0;
    bool peer_ts_ = false;
    bool peer_sack_ = false;
    std::uint64_t rcv_nxt_ = 0;

    struct Held {
        std::uint32_t len;
        std::uint64_t digest;
    };
    std::map<std::uint64_t, Held> ooo_;
    std::deque<std::uint64_t> recent_;  // most recent out-of-order arrivals first

    std::uint32_t ts_recent_ = 0;
    bool ece_latch_ = false;
    bool last_ce_ = false;

    std::uint32_t unacked_ = 0;
    std::uint64_t delack_gen_ = 0;

    std::uint64_t stream_hash_ = 0;
    std::uint32_t duplicates_ = 0;
    std::uint32_t acks_sent_ = 0;
};

}  // namespace tracks
