#include "tracks/fabric.hpp"

#include <algorithm>
#include <cmath>

namespace tracks {

std::uint64_t Link::serialization_ps(std::uint32_t bytes) const {
    const unsigned __int128 bits = static_cast<unsigned __int128>(bytes) * 8u;
    const unsigned __int128 ps = bits * 1'000'000'000'000ULL;
    return static_cast<std::uint64_t>((ps + capacity_bps - 1) / capacity_bps);
}

Link::Timing Link::transmit(SimTime now, std::uint32_t bytes, bool continuation,
                            std::uint64_t ready_ps) {
    const std::uint64_t now_ps = now * kPsPerUs;
    std::uint64_t start = continuation ? std::max(busy_until_ps, ready_ps)
                                       : std::max(busy_until_ps, now_ps);
    const std::uint64_t finish = start + serialization_ps(bytes);
    busy_until_ps = finish;
    Timing t;
    t.start_ps = start;
    t.finish_ps = finish;
    t.free_at = std::max(now, ps_to_us_ceil(finish));
    t.arrival_at = std::max(now, ps_to_us_ceil(finish + propagation_ps));
    return t;
}

PortQueue::PortQueue(std::uint32_t capacity_pkts, AqmPolicy aqm, RngStream rng, bool ecn_capable,
                     double mean_pkt_time_us)
    : capacity_(capacity_pkts),
      aqm_(aqm),
      rng_(rng),
      ecn_capable_(ecn_capable),
      mean_pkt_time_us_(mean_pkt_time_us > 0 ? mean_pkt_time_us : 1.0) {}

bool PortQueue::red_decide(SimTime) {
    const RedParams& r = aqm_.red;
    if (avg_ < r.min_th) {
        red_count_ = -1;
        return false;
    }
    if (avg_ >= r.max_th) {
        red_count_ = 0;
        return true;
    }
    ++red_count_;
    const double pb = r.max_p * (avg_ - r.min_th) / (r.max_th - r.min_th);
    const double denom = 1.0 - static_cast<double>(red_count_) * pb;
    const double pa = denom <= 0.0 ? 1.0 : std::min(1.0, pb / denom);
    if (rng_.uniform01() < pa) {
        red_count_ = 0;
        return true;
    }
    return false;
}

PortQueue::Outcome PortQueue::admit(std::uint32_t handle, Segment& seg, SimTime now) {
    Outcome out;
    const std::uint32_t occ = occupancy();
    const bool full = occ >= capacity_;

    switch (aqm_.kind) {
        case AqmKind::DropTail:
            if (full) {
                out.result = AdmitResult::Dropped;
                return out;
            }
            break;

        case AqmKind::DropRand:
            if (full) {
                if (fifo_.empty()) {
                    out.result = AdmitResult::Dropped;
                    return out;
                }
                const auto victim = rng_.below(fifo_.size());
                out.evicted = fifo_[victim];
                fifo_.erase(fifo_.begin() + static_cast<std::ptrdiff_t>(victim));
            }
            break;

        case AqmKind::RedEcn: {
            const double wq = aqm_.red.wq;
            if (occ == 0 && idle_since_) {
                const double m = static_cast<double>(now - *idle_since_) / mean_pkt_time_us_;
                avg_ *= std::pow(1.0 - wq, m);
            } else {
                avg_ = (1.0 - wq) * avg_ + wq * static_cast<double>(occ);
            }
            if (full) {
                out.result = AdmitResult::Dropped;
                idle_since_.reset();
                return out;
            }
            if (red_decide(now)) {
                if (ecn_capable_ && seg.ect) {
                    seg.ce = true;
                    out.result = AdmitResult::EnqueuedMarked;
                } else {
                    out.result = AdmitResult::Dropped;
                    idle_since_.reset();
                    return out;
                }
            }
            break;
        }

        case AqmKind::DctcpMark:
            if (full) {
                out.result = AdmitResult::Dropped;
                return out;
            }
            if (occ >= aqm_.dctcp_k && ecn_capable_ && seg.ect) {
                seg.ce = true;
                out.result = AdmitResult::EnqueuedMarked;
            }
            break;
    }

    idle_since_.reset();
    fifo_.push_back(handle);
    return out;
}

std::optional<std::uint32_t> PortQueue::dequeue(SimTime now) {
    if (fifo_.empty()) {
        if (!idle_since_) idle_since_ = now;
        return std::nullopt;
    }
    const auto h = fifo_.front();
    fifo_.pop_front();
    return h;
}

Port::Port(Network& net, PortId id, Link link, PortQueue queue, EntityId downstream)
    : net_(net), id_(id), link_(link), queue_(std::move(queue)), downstream_(downstream) {}

void Port::accept(std::uint32_t handle) {
    Packet& p = net_.packet(handle);
    const SimTime now = net_.sim().now();
    const std::uint32_t occ = queue_.occupancy();
    Observer* obs = net_.observer();

    if (net_.loss_filter() && net_.loss_filter()(p.seg, id_)) {
        ++dropped_;
        if (obs) obs->on_admit(id_, p.seg, occ, AdmitResult::Dropped, now);
        net_.release_dropped(handle);
        return;
    }

    const auto out = queue_.admit(handle, p.seg, now);
    if (obs) obs->on_admit(id_, p.seg, occ, out.result, now);
    if (out.result == AdmitResult::Dropped) {
        ++dropped_;
        net_.release_dropped(handle);
        return;
    }
    ++admitted_;
    if (out.result == AdmitResult::EnqueuedMarked) ++marked_;
    p.enqueued_at = now;
    if (out.evicted) {
        ++dropped_;
        if (obs) obs->on_evict(id_, net_.packet(*out.evicted).seg, now);
        net_.release_dropped(*out.evicted);
    }
    if (!busy_) start_next(false);
}

void Port::start_next(bool continuation) {
    const SimTime now = net_.sim().now();
    const auto h = queue_.dequeue(now);
    if (!h) {
        busy_ = false;
        return;
    }
    busy_ = true;
    Packet& p = net_.packet(*h);
    const auto timing = link_.transmit(now, p.seg.wire_bytes(net_.frame_overhead()), continuation,
                                       p.enqueued_at * kPsPerUs);
    ++p.hop;
    ++departed_;
    if (Observer* obs = net_.observer()) obs->on_depart(id_, p.seg, now);
    net_.sim().schedule(timing.arrival_at, EventKind::PacketArrival, downstream_, *h);
    net_.sim().schedule(timing.free_at, EventKind::LinkFree, entity_);
}

void Port::handle_event(const Event& ev) {
    if (ev.kind == EventKind::LinkFree) start_next(true);
}

void Switch::handle_event(const Event& ev) {
    if (ev.kind == EventKind::PacketArrival) net_.forward(static_cast<std::uint32_t>(ev.payload));
}

Network::Network(Simulator& sim, Observer* observer, std::uint32_t frame_overhead)
    : sim_(sim), observer_(observer), frame_overhead_(frame_overhead) {}

PortId Network::add_port(Link link, PortQueue queue, EntityId downstream) {
    const auto id = static_cast<PortId>(ports_.size());
    ports_.push_back(std::make_unique<Port>(*this, id, link, std::move(queue), downstream));
    ports_.back()->set_entity(sim_.register_handler(ports_.back().get()));
    return id;
}

EntityId Network::add_switch() {
    switches_.push_back(std::make_unique<Switch>(*this));
    return sim_.register_handler(switches_.back().get());
}

std::uint32_t Network::add_path(std::vector<PortId> ports) {
    paths_.push_back(std::move(ports));
    return static_cast<std::uint32_t>(paths_.size() - 1);
}

std::uint32_t Network::alloc(const Segment& seg, std::uint32_t path) {
    std::uint32_t h;
    if (!free_.empty()) {
        h = free_.back();
        free_.pop_back();
    } else {
        h = static_cast<std::uint32_t>(pool_.size());
        pool_.emplace_back();
    }
    Packet& p = pool_[h];
    p.seg = seg;
    p.seg.uid = next_uid_++;
    p.path = path;
    p.hop = 0;
    ++created_;
    ++live_;
    return h;
}

void Network::free_handle(std::uint32_t handle) {
    --live_;
    free_.push_back(handle);
}

void Network::send(const Segment& seg, std::uint32_t path) {
    const auto h = alloc(seg, path);
    ports_[paths_[path][0]]->accept(h);
}

void Network::forward(std::uint32_t handle) {
    Packet& p = pool_[handle];
    const auto& route = paths_[p.path];
    if (p.hop >= route.size()) throw SimulationError("packet forwarded past the end of its route");
    ports_[route[p.hop]]->accept(handle);
}

Segment Network::take(std::uint32_t handle) {
    Segment s = pool_[handle].seg;
    ++delivered_;
    free_handle(handle);
    return s;
}

void Network::release_dropped(std::uint32_t handle) {
    ++dropped_;
    free_handle(handle);
}

}  // namespace tracks
