#include <doctest.h>

#include <set>

#include "tracks/errors.hpp"
#include "tracks/fabric.hpp"
#include "tracks/topology.hpp"

using namespace tracks;

namespace {

Segment data_seg(std::uint32_t len = kDefaultMss, bool ect = true) {
    Segment s;
    s.flags = tcp_flags::kAck;
    s.payload_len = len;
    s.ect = ect;
    return s;
}

struct Sink : EventHandler {
    Network* net = nullptr;
    std::vector<std::pair<SimTime, Segment>> got;
    void handle_event(const Event& ev) override {
        got.emplace_back(net->sim().now(), net->take(static_cast<std::uint32_t>(ev.payload)));
    }
};

AqmPolicy policy(AqmKind k) {
    AqmPolicy p;
    p.kind = k;
    return p;
}

}  // namespace

TEST_CASE("serialization times") {
    Link l;
    l.capacity_bps = 1'000'000'000;
    CHECK(l.serialization_ps(1500) == 12'000'000);  // 12 us
    l.capacity_bps = 10'000'000'000ULL;
    CHECK(l.serialization_ps(1500) == 1'200'000);  // 1.2 us
    // Pure ACK with a 38-byte frame overhead: (40 + 38) * 8 bits at 1 Gb/s.
    Segment ack;
    ack.flags = tcp_flags::kAck;
    l.capacity_bps = 1'000'000'000;
    CHECK(l.serialization_ps(ack.wire_bytes(38)) == 78ULL * 8 * 1000);
}

TEST_CASE("link serializes one frame at a time") {
    Link l;
    l.capacity_bps = 1'000'000'000;
    l.propagation_ps = 5'000'000;
    const auto a = l.transmit(0, 1500);
    const auto b = l.transmit(0, 1500);
    CHECK(a.finish_ps == 12'000'000);
    CHECK(b.start_ps == a.finish_ps);
    CHECK(b.arrival_at == 29);  // 24 us serialization + 5 us propagation
}

TEST_CASE("DropTail admission") {
    PortQueue q(100, policy(AqmKind::DropTail), RngStream(1));
    for (std::uint32_t i = 0; i < 100; ++i) {
        auto s = data_seg();
        REQUIRE(q.admit(i, s, 0).result == AdmitResult::Enqueued);
    }
    auto s = data_seg();
    CHECK(q.admit(100, s, 0).result == AdmitResult::Dropped);
    CHECK(q.occupancy() == 100);
    for (std::uint32_t i = 0; i < 100; ++i) CHECK(*q.dequeue(0) == i);  // FIFO
    CHECK_FALSE(q.dequeue(0).has_value());
}

TEST_CASE("DctcpMark threshold boundary") {
    auto p = policy(AqmKind::DctcpMark);
    p.dctcp_k = 20;
    PortQueue q(100, p, RngStream(1));
    for (std::uint32_t i = 0; i < 19; ++i) {
        auto s = data_seg();
        q.admit(i, s, 0);
    }
    auto at19 = data_seg();
    CHECK(q.admit(19, at19, 0).result == AdmitResult::Enqueued);
    CHECK_FALSE(at19.ce);
    auto at20 = data_seg();
    CHECK(q.admit(20, at20, 0).result == AdmitResult::EnqueuedMarked);
    CHECK(at20.ce);
    auto not_ect = data_seg(kDefaultMss, false);
    CHECK(q.admit(21, not_ect, 0).result == AdmitResult::Enqueued);
    CHECK_FALSE(not_ect.ce);
}

TEST_CASE("RED never acts below min_th") {
    PortQueue q(100, policy(AqmKind::RedEcn), RngStream(1));
    for (std::uint32_t i = 0; i < 100; ++i) {
        auto s = data_seg();
        // occupancy climbs to 99, but the average stays far below 20 with wq=0.002
        CHECK(q.admit(i, s, static_cast<SimTime>(i)).result == AdmitResult::Enqueued);
        CHECK(q.avg_q() < 20.0);
    }
}

TEST_CASE("RED average follows the EWMA") {
    auto p = policy(AqmKind::RedEcn);
    p.red.wq = 0.5;
    PortQueue q(100, p, RngStream(1));
    double avg = 0;
    for (std::uint32_t i = 0; i < 6; ++i) {
        auto s = data_seg();
        q.admit(i, s, 0);
        if (i > 0) avg = 0.5 * avg + 0.5 * i;  // occupancy before arrival is i
        CHECK(q.avg_q() == doctest::Approx(avg));
    }
}

TEST_CASE("RED above max_th marks ECT and drops non-ECT") {
    PortQueue q(100, policy(AqmKind::RedEcn), RngStream(1));
    auto s = data_seg();
    q.admit(0, s, 0);
    q.set_avg_q(90);
    auto ect = data_seg();
    CHECK(q.admit(1, ect, 0).result == AdmitResult::EnqueuedMarked);
    q.set_avg_q(90);
    auto plain = data_seg(kDefaultMss, false);
    CHECK(q.admit(2, plain, 0).result == AdmitResult::Dropped);
}

TEST_CASE("DropRand pushes out a queued victim") {
    PortQueue q(10, policy(AqmKind::DropRand), RngStream(7));
    for (std::uint32_t i = 0; i < 10; ++i) {
        auto s = data_seg();
        q.admit(i, s, 0);
    }
    auto s = data_seg();
    const auto out = q.admit(10, s, 0);
    CHECK(out.result == AdmitResult::Enqueued);
    REQUIRE(out.evicted.has_value());
    CHECK(*out.evicted < 10);
    CHECK(q.occupancy() == 10);
    std::set<std::uint32_t> left;
    while (auto h = q.dequeue(0)) left.insert(*h);
    CHECK(left.count(10) == 1);
    CHECK(left.count(*out.evicted) == 0);
}

TEST_CASE("dumbbell RTT composes to the configured value") {
    Simulator sim;
    Network net(sim);
    DumbbellSpec spec;
    spec.n_senders = 2;
    Dumbbell db(spec);
    Sink s0, s1, rx;
    s0.net = s1.net = rx.net = &net;
    std::vector<EntityId> ents = {sim.register_handler(&s0), sim.register_handler(&s1), sim.register_handler(&rx)};
    db.build(net, ents, FabricAqm{}, RngFactory(1));

    const auto fwd = db.route(0, 2, {});
    REQUIRE(fwd.size() == 2);
    CHECK(fwd[1] == db.bottleneck_port());
    const auto p_fwd = net.add_path(fwd);
    const auto p_rev = net.add_path(db.route(2, 0, {}));
    net.send(data_seg(), p_fwd);
    sim.run_until(1000);
    REQUIRE(rx.got.size() == 1);
    Segment ack;
    ack.flags = tcp_flags::kAck;
    const SimTime ack_sent = sim.now();
    net.send(ack, p_rev);
    sim.run_until(2000);
    REQUIRE(s0.got.size() == 1);
    const SimTime rtt = rx.got[0].first + (s0.got[0].first - ack_sent);
    // Analytic 100 us; each hop rounds its arrival up to the next microsecond.
    CHECK(rtt >= 100);
    CHECK(rtt <= 102);
    CHECK_THROWS_AS(db.route(0, 1, {}), ConfigError);
    CHECK_THROWS_AS(db.route(0, 9, {}), ConfigError);
}

TEST_CASE("packet conservation and per-port FIFO") {
    Simulator sim;
    Network net(sim);
    DumbbellSpec spec;
    spec.n_senders = 4;
    spec.buffer_pkts = 8;
    Dumbbell db(spec);
    std::vector<Sink> sinks(5);
    std::vector<EntityId> ents;
    for (auto& s : sinks) {
        s.net = &net;
        ents.push_back(sim.register_handler(&s));
    }
    db.build(net, ents, FabricAqm{}, RngFactory(1));
    std::uint64_t sent = 0;
    for (HostId h = 0; h < 4; ++h) {
        const auto p = net.add_path(db.route(h, 4, {}));
        for (std::uint32_t i = 0; i < 10; ++i) {
            auto s = data_seg();
            s.seq = h * 100 + i;
            net.send(s, p);
            ++sent;
        }
    }
    sim.run_until(5000);
    CHECK(net.created() == sent);
    CHECK(net.delivered() + net.dropped() + net.in_flight() == sent);
    CHECK(net.in_flight() == 0);
    CHECK(net.dropped() > 0);
    // per-sender order survives the shared FIFO
    std::vector<std::uint32_t> last(4, 0);
    std::vector<bool> seen(4, false);
    for (const auto& [t, s] : sinks[4].got) {
        const auto h = s.seq / 100;
        if (seen[h]) CHECK(s.seq > last[h]);
        seen[h] = true;
        last[h] = s.seq;
    }
}

TEST_CASE("CE marks match the occupancy seen at admission") {
    struct Watch : Observer {
        std::uint32_t k = 0;
        PortId watched = 0;
        int mismatches = 0, marks = 0;
        void on_admit(PortId port, const Segment& s, std::uint32_t occ, AdmitResult r, SimTime) override {
            // host NICs are plain drop-tail
            if (port != watched || r == AdmitResult::Dropped) return;
            const bool marked = r == AdmitResult::EnqueuedMarked;
            marks += marked;
            if (marked != (s.ect && occ >= k)) ++mismatches;
        }
    } w;
    Simulator sim;
    Network net(sim, &w);
    DumbbellSpec spec;
    spec.n_senders = 4;
    Dumbbell db(spec);
    FabricAqm aqm;
    aqm.policy.kind = AqmKind::DctcpMark;
    aqm.dctcp_k_override = 5;
    w.k = 5;
    std::vector<Sink> sinks(5);
    std::vector<EntityId> ents;
    for (auto& s : sinks) {
        s.net = &net;
        ents.push_back(sim.register_handler(&s));
    }
    db.build(net, ents, aqm, RngFactory(1));
    w.watched = db.bottleneck_port();
    for (HostId h = 0; h < 4; ++h) {
        const auto p = net.add_path(db.route(h, 4, {}));
        for (int i = 0; i < 10; ++i) net.send(data_seg(), p);
    }
    sim.run_until(5000);
    CHECK(w.marks > 0);
    CHECK(w.mismatches == 0);
}

TEST_CASE("leaf-spine shape") {
    LeafSpineSpec spec;
    LeafSpine ls(spec);
    CHECK(ls.host_count() == 36);
    // host bandwidth into a leaf / uplink bandwidth out of it
    const double ratio = 4.0 * 10e9 / (4.0 * static_cast<double>(ls.uplink_rate_bps()));
    CHECK(ratio == doctest::Approx(5.0));
    // intra-rack BDP: 10 Gb/s * 4 hops * 50 us = 2e6 bits = 166.7 frames of 1500 B
    CHECK(ls.buffer_pkts() == 167);

    Simulator sim;
    Network net(sim);
    std::vector<Sink> sinks(36);
    std::vector<EntityId> ents;
    for (auto& s : sinks) {
        s.net = &net;
        ents.push_back(sim.register_handler(&s));
    }
    ls.build(net, ents, FabricAqm{}, RngFactory(1));
    const FlowTuple t{1, 2, 3, 4};
    CHECK(ls.route(0, 1, t).size() == 2);  // same leaf: never touches a spine
    const auto a = ls.route(0, 35, t), b = ls.route(0, 35, t);
    CHECK(a.size() == 4);
    CHECK(a == b);
    std::set<std::uint32_t> spines;
    for (std::uint16_t p = 0; p < 64; ++p) spines.insert(ls.spine_for({1, 2, p, 80}));
    CHECK(spines.size() == 4);  // ECMP spreads flows across all spines
    CHECK_THROWS_AS(ls.route(0, 36, t), ConfigError);
}

TEST_CASE("loss filter drops at admission and counts") {
    Simulator sim;
    Network net(sim);
    DumbbellSpec spec;
    spec.n_senders = 1;
    Dumbbell db(spec);
    Sink a, b;
    a.net = b.net = &net;
    db.build(net, {sim.register_handler(&a), sim.register_handler(&b)}, FabricAqm{}, RngFactory(1));
    net.set_loss_filter([](const Segment& s, PortId) { return s.seq == 2; });
    const auto p = net.add_path(db.route(0, 1, {}));
    for (std::uint32_t i = 1; i <= 3; ++i) {
        auto s = data_seg();
        s.seq = i;
        net.send(s, p);
    }
    sim.run_until(1000);
    CHECK(b.got.size() == 2);
    CHECK(net.dropped() == 1);
}
