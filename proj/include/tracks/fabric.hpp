// Links, switch port queues with AQM, packet forwarding along source routes.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "tracks/segment.hpp"
#include "tracks/sim.hpp"
#include "tracks/trace.hpp"

namespace tracks {

/// Serialization bookkeeping is kept in picoseconds so that sub-microsecond
/// frame times accumulate exactly; event times are rounded up to whole
/// microseconds only when scheduling.
struct Link {
    std::uint64_t capacity_bps = 1'000'000'000;
    std::uint64_t propagation_ps = 0;
    std::uint64_t busy_until_ps = 0;

    struct Timing {
        std::uint64_t start_ps;
        std::uint64_t finish_ps;
        SimTime free_at;     // serialization done (µs, rounded up)
        SimTime arrival_at;  // last bit at the far end (µs, rounded up)
    };

    std::uint64_t serialization_ps(std::uint32_t bytes) const;
    /// Starts serializing a frame at max(now, busy_until). With `continuation`, the frame follows the previous one back to back
    /// (start = max(busy_until, ready_ps)) instead of starting at `now`.
    Timing transmit(SimTime now, std::uint32_t bytes, bool continuation = false,
                    std::uint64_t ready_ps = 0);
};

constexpr std::uint64_t kPsPerUs = 1'000'000;
inline SimTime ps_to_us_ceil(std::uint64_t ps) { return (ps + kPsPerUs - 1) / kPsPerUs; }

enum class AqmKind : std::uint8_t { DropTail, DropRand, RedEcn, DctcpMark };

struct RedParams {
    double min_th = 20;
    double max_th = 80;
    double max_p = 0.1;
    double wq = 0.002;
};

struct AqmPolicy {
    AqmKind kind = AqmKind::DropTail;
    RedParams red;
    std::uint32_t dctcp_k = 20;
};

/// FIFO of packet handles with an admission policy.
class PortQueue {
  public:
    struct Outcome {
        AdmitResult result = AdmitResult::Enqueued;
        std::optional<std::uint32_t> evicted;  // DropRand push-out victim
    };

    PortQueue(std::uint32_t capacity_pkts, AqmPolicy aqm, RngStream rng, bool ecn_capable = true,
              double mean_pkt_time_us = 12.0);

    /// Applies the AQM to an arriving packet; may set `seg.ce`.
    Outcome admit(std::uint32_t handle, Segment& seg, SimTime now);
    std::optional<std::uint32_t> dequeue(SimTime now);

    std::uint32_t occupancy() const { return static_cast<std::uint32_t>(fifo_.size()); }
    std::uint32_t capacity() const { return capacity_; }
    double avg_q() const { return avg_; }
    const AqmPolicy& policy() const { return aqm_; }

    /// Test hook: force the RED average.
    void set_avg_q(double v) { avg_ = v; }

  private:
    bool red_decide(SimTime now);

    std::deque<std::uint32_t> fifo_;
    std::uint32_t capacity_;
    AqmPolicy aqm_;
    RngStream rng_;
    bool ecn_capable_;
    double mean_pkt_time_us_;
    double avg_ = 0.0;
    long red_count_ = -1;
    std::optional<SimTime> idle_since_ = SimTime{0};
};

struct Packet {
    Segment seg;
    std::uint32_t path = 0;
    std::uint16_t hop = 0;
    SimTime enqueued_at = 0;
};

class Network;

class Port : public EventHandler {
  public:
    Port(Network& net, PortId id, Link link, PortQueue queue, EntityId downstream);

    void accept(std::uint32_t handle);
    void handle_event(const Event& ev) override;

    void set_entity(EntityId e) { entity_ = e; }
    const Link& link() const { return link_; }
    const PortQueue& queue() const { return queue_; }
    PortQueue& queue() { return queue_; }
    EntityId downstream() const { return downstream_; }

    std::uint64_t admitted() const { return admitted_; }
    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t marked() const { return marked_; }
    std::uint64_t departed() const { return departed_; }

  private:
    void start_next(bool continuation);

    Network& net_;
    PortId id_;
    Link link_;
    PortQueue queue_;
    EntityId downstream_;
    EntityId entity_ = 0;
    bool busy_ = false;
    std::uint64_t admitted_ = 0, dropped_ = 0, marked_ = 0, departed_ = 0;
};

/// A switch forwards every arriving packet to the next port on its route.
class Switch : public EventHandler {
  public:
    explicit Switch(Network& net) : net_(net) {}
    void handle_event(const Event& ev) override;

  private:
    Network& net_;
};

class Network {
  public:
    using LossFilter = std::function<bool(const Segment&, PortId)>;

    Network(Simulator& sim, Observer* observer = nullptr, std::uint32_t frame_overhead = 0);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    PortId add_port(Link link, PortQueue queue, EntityId downstream);
    EntityId add_switch();
    std::uint32_t add_path(std::vector<PortId> ports);
    const std::vector<PortId>& path(std::uint32_t id) const { return paths_.at(id); }

    /// Puts a segment on the wire at hop 0 of `path`.
    void send(const Segment& seg, std::uint32_t path);
    /// Called on packet arrival at a switch.
    void forward(std::uint32_t handle);
    /// Called on packet arrival at a host; releases the packet.
    Segment take(std::uint32_t handle);

    Packet& packet(std::uint32_t handle) { return pool_[handle]; }
    void release_dropped(std::uint32_t handle);

    /// Constructed-scenario hook: packets for which the filter returns true
    /// are dropped at admission (counted as drops).
    void set_loss_filter(LossFilter f) { loss_filter_ = std::move(f); }
    const LossFilter& loss_filter() const { return loss_filter_; }

    Simulator& sim() { return sim_; }
    Observer* observer() const { return observer_; }
    std::uint32_t frame_overhead() const { return frame_overhead_; }
    Port& port(PortId id) { return *ports_.at(id); }
    std::size_t port_count() const { return ports_.size(); }

    std::uint64_t created() const { return created_; }
    std::uint64_t delivered() const { return delivered_; }
    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t in_flight() const { return live_; }

  private:
    friend class Port;
    std::uint32_t alloc(const Segment& seg, std::uint32_t path);
    void free_handle(std::uint32_t handle);

    Simulator& sim_;
    Observer* observer_;
    std::uint32_t frame_overhead_;
    std::vector<std::unique_ptr<Port>> ports_;
    std::vector<std::unique_ptr<Switch>> switches_;
    std::vector<std::vector<PortId>> paths_;
    std::vector<Packet> pool_;
    std::vector<std::uint32_t> free_;
    LossFilter loss_filter_;
    std::uint64_t created_ = 0, delivered_ = 0, dropped_ = 0, live_ = 0, next_uid_ = 1;
};

}  // namespace tracks
