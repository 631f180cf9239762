#include "tracks/sim.hpp"

#include <cmath>

namespace tracks {

EntityId Simulator::register_handler(EventHandler* handler) {
    handlers_.push_back(handler);
    return static_cast<EntityId>(handlers_.size() - 1);
}

void Simulator::schedule(Event ev) {
    if (ev.fire_time < now_) {
        throw SimulationError("event scheduled in the past: t=" + std::to_string(ev.fire_time) +
                              " now=" + std::to_string(now_));
    }
    if (ev.target >= handlers_.size()) {
        throw SimulationError("event for unknown entity " + std::to_string(ev.target));
    }
    ev.sequence_number = next_seq_++;
    queue_.push(ev);
    ++scheduled_;
}

void Simulator::schedule(SimTime at, EventKind kind, EntityId target, std::uint64_t payload,
                         std::uint32_t aux) {
    Event ev;
    ev.fire_time = at;
    ev.kind = kind;
    ev.target = target;
    ev.payload = payload;
    ev.aux = aux;
    schedule(ev);
}

void Simulator::run_until(SimTime t_end) {
    stopped_ = false;
    while (!queue_.empty() && !stopped_) {
        const Event& top = queue_.top();
        if (top.fire_time > t_end) break;
        Event ev = top;
        queue_.pop();
        now_ = ev.fire_time;
        ++dispatched_;
        handlers_[ev.target]->handle_event(ev);
    }
    if (!stopped_ && now_ < t_end) now_ = t_end;
}

double RngStream::uniform01() {
    // 53 random mantissa bits: exactly representable, strictly below 1.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    if (!(lo < hi)) return lo;
    double v = lo + (hi - lo) * uniform01();
    if (v >= hi) v = std::nextafter(hi, lo);
    return v;
}

double RngStream::exponential(double mean) {
    return -mean * std::log1p(-uniform01());
}

std::uint64_t RngStream::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased and platform independent.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream RngFactory::stream(std::string_view name) const {
    return RngStream(mix64(master_ ^ fnv1a64(name)));
}

}  // namespace tracks
