// Discrete-event engine: virtual clock, ordered event queue, seeded random
// substreams.
#pragma once

#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracks {

/// Microseconds since simulation start.
using SimTime = std::uint64_t;

constexpr SimTime kUsec = 1;
constexpr SimTime kMsec = 1000;
constexpr SimTime kSec = 1000000;

using EntityId = std::uint32_t;

enum class EventKind : std::uint8_t { PacketArrival, TimerExpiry, AppFlowStart, LinkFree };

struct Event {
    SimTime fire_time = 0;
    std::uint64_t sequence_number = 0;
    EventKind kind = EventKind::TimerExpiry;
    EntityId target = 0;
    std::uint64_t payload = 0;
    std::uint32_t aux = 0;
};

/// Raised for violations of engine preconditions (e.g. scheduling in the
/// past). These abort the run.
class SimulationError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

class EventHandler {
  public:
    virtual ~EventHandler() = default;
    virtual void handle_event(const Event& ev) = 0;
};

class Simulator {
  public:
    Simulator() = default;
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    EntityId register_handler(EventHandler* handler);

    /// Queues `ev`; its sequence number is assigned here in insertion order.
    void schedule(Event ev);
    void schedule(SimTime at, EventKind kind, EntityId target, std::uint64_t payload = 0,
                  std::uint32_t aux = 0);

    /// Dispatches every event with fire_time <= t_end, then leaves the clock
    /// at t_end (unless stop() was called, in which case it stays at the
    /// time of the last dispatched event).
    void run_until(SimTime t_end);
    void stop() { stopped_ = true; }

    SimTime now() const { return now_; }
    std::uint64_t scheduled_count() const { return scheduled_; }
    std::uint64_t dispatched_count() const { return dispatched_; }
    std::uint64_t pending_count() const { return queue_.size(); }

  private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
            return a.sequence_number > b.sequence_number;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<EventHandler*> handlers_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t scheduled_ = 0;
    std::uint64_t dispatched_ = 0;
    bool stopped_ = false;
};

/// One named substream of a master seed. Identical (seed, name) pairs give
/// identical sequences, and streams never share state.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on [lo, hi); returns lo when lo == hi.
    double uniform(double lo, double hi);
    double uniform01();
    double exponential(double mean);
    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n);
    std::uint64_t next_u64() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);

class RngFactory {
  public:
    explicit RngFactory(std::uint64_t master_seed) : master_(master_seed) {}
    RngStream stream(std::string_view name) const;
    std::uint64_t master_seed() const { return master_; }

  private:
    std::uint64_t master_;
};

}  // namespace tracks
