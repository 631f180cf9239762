// Optional instrumentation hooks. The simulator calls these at the points the
// property suites need to observe; the default implementation ignores them.
#pragma once

#include <cstdint>

#include "tracks/segment.hpp"
#include "tracks/sim.hpp"

namespace tracks {

enum class AdmitResult : std::uint8_t { Enqueued, EnqueuedMarked, Dropped };
enum class IncomingVerdict : std::uint8_t { Pass, PassRewritten, Drop };

using PortId = std::uint32_t;
using HostId = std::uint32_t;

class Observer {
  public:
    virtual ~Observer() = default;

    // fabric
    virtual void on_admit(PortId, const Segment&, std::uint32_t /*occupancy_before*/, AdmitResult,
                          SimTime) {}
    virtual void on_evict(PortId, const Segment&, SimTime) {}
    virtual void on_depart(PortId, const Segment&, SimTime) {}

    // shim
    virtual void on_episode_open(HostId, const FlowTuple&, SimTime /*now*/, SimTime /*last_activity*/,
                                 double /*beta_us*/, double /*rtt_us*/) {}
    virtual void on_spoof(HostId, const FlowTuple&, std::uint32_t /*episode_spoofs*/, SimTime) {}
    virtual void on_episode_stop(HostId, const FlowTuple&, SimTime) {}
    virtual void on_long_lived(HostId, const FlowTuple&, SimTime) {}
    /// `duplicate` and `episode_open` describe the shim state when the ACK
    /// arrived from the network.
    virtual void on_incoming_ack(HostId, const FlowTuple&, bool /*duplicate*/, bool /*episode_open*/,
                                 IncomingVerdict, SimTime) {}

    // tcp
    virtual void on_sender_ack(std::uint32_t /*flow_id*/, const Segment&, SimTime) {}
    virtual void on_retransmit(std::uint32_t /*flow_id*/, std::uint64_t /*offset*/, bool /*rto*/,
                               SimTime) {}
    virtual void on_fast_retransmit(std::uint32_t /*flow_id*/, double /*flight_segs*/,
                                    double /*ssthresh*/, SimTime) {}
    virtual void on_cwnd(std::uint32_t /*flow_id*/, double /*cwnd*/, SimTime) {}
};

}  // namespace tracks
