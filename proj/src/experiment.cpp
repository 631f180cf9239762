#include "tracks/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "tracks/errors.hpp"

namespace tracks {

namespace {

constexpr std::uint32_t kTickTimer = 0;
constexpr std::uint32_t kSpoofTimer = 1;
constexpr std::uint32_t kFirstConnTimer = 2;
constexpr std::uint64_t kPersistentBacklog = 1ULL << 50;

std::uint32_t host_ip(HostId h) { return 0x0A000001u + h; }

struct TupleHash {
    std::size_t operator()(const FlowTuple& t) const { return static_cast<std::size_t>(hash_flow_key(t)); }
};

class Run;
class Host;

struct Conn final : TcpServices {
    Conn(Run& r, Host& h, std::uint32_t s, std::uint32_t p, std::uint32_t f)
        : run(r), host(h), slot(s), path(p), flow_index(f) {}

    SimTime now() const override;
    void emit(const Segment& seg) override;
    void set_timer(std::uint32_t timer_id, SimTime at, std::uint64_t token) override;
    void flow_completed(std::uint32_t flow_id) override;
    Observer* observer() const override;

    Run& run;
    Host& host;
    std::uint32_t slot;
    std::uint32_t path;
    std::uint32_t flow_index;
    std::unique_ptr<TcpSender> snd;
    std::unique_ptr<TcpReceiver> rcv;
};

class Host final : public EventHandler {
  public:
    Host(Run& run, HostId id);

    void handle_event(const Event& ev) override;
    void emit(Conn& c, const Segment& seg);
    Conn& add_conn(std::uint32_t path, std::uint32_t flow_index, const FlowTuple& local_to_remote);

    EntityId entity() const { return entity_; }
    TracksShim* shim() { return shim_.get(); }

  private:
    void deliver(Segment seg);
    void tick();
    void arm_tick();

    Run& run_;
    HostId id_;
    EntityId entity_;
    std::unique_ptr<TracksShim> shim_;
    bool tick_armed_ = false;
    std::deque<Segment> spoofs_;
    std::vector<std::unique_ptr<Conn>> conns_;
    std::unordered_map<FlowTuple, Conn*, TupleHash> by_tuple_;
};

struct FlowState {
    FlowSpec spec;
    FlowTuple tuple;
    std::uint32_t isn = 0;
    Conn* snd = nullptr;
    Conn* rcv = nullptr;
    std::optional<SimTime> end;
};

class Run {
  public:
    Run(const ExperimentConfig& cfg, const std::vector<FlowSpec>& schedule);
    RunResult execute();

    void start_flow(std::uint32_t index);
    void completed(std::uint32_t index);
    bool inject_drop(const Conn& c, const Segment& seg);

    const ExperimentConfig& cfg;
    Simulator sim;
    RngFactory rngs;
    std::unique_ptr<Topology> topo;
    std::unique_ptr<Network> net;
    ShimConfig shim_cfg;
    std::vector<std::unique_ptr<Host>> hosts;
    std::vector<FlowState> flows;
    std::size_t finite_remaining = 0;
    std::uint64_t injected_drops = 0;
    std::uint64_t sched_hash = 0;
};

// --- Conn -------------------------------------------------------------------

SimTime Conn::now() const { return run.sim.now(); }
void Conn::emit(const Segment& seg) { host.emit(*this, seg); }
void Conn::set_timer(std::uint32_t, SimTime at, std::uint64_t token) {
    run.sim.schedule(at, EventKind::TimerExpiry, host.entity(), token, kFirstConnTimer + slot);
}
void Conn::flow_completed(std::uint32_t) { run.completed(flow_index); }
Observer* Conn::observer() const { return run.cfg.observer; }

// --- Host -------------------------------------------------------------------

Host::Host(Run& run, HostId id) : run_(run), id_(id) {
    entity_ = run.sim.register_handler(this);
    if (run.cfg.shim_enabled) {
        shim_ = std::make_unique<TracksShim>(run.shim_cfg, id, run.rngs.stream("shim/" + std::to_string(id)),
                                             run.cfg.observer);
    }
}

Conn& Host::add_conn(std::uint32_t path, std::uint32_t flow_index, const FlowTuple& local_to_remote) {
    const auto slot = static_cast<std::uint32_t>(conns_.size());
    conns_.push_back(std::make_unique<Conn>(run_, *this, slot, path, flow_index));
    Conn& c = *conns_.back();
    by_tuple_[local_to_remote] = &c;
    return c;
}

void Host::emit(Conn& c, const Segment& seg) {
    if (shim_) {
        shim_->on_outgoing(seg, run_.sim.now());
        arm_tick();
    }
    if (c.snd && run_.inject_drop(c, seg)) return;
    run_.net->send(seg, c.path);
}

void Host::deliver(Segment seg) {
    const auto it = by_tuple_.find(seg.tuple.reversed());
    if (it == by_tuple_.end()) return;
    Conn& c = *it->second;
    if (shim_ && c.snd && shim_->on_incoming(seg, run_.sim.now()) == IncomingVerdict::Drop) return;
    if (c.snd) {
        c.snd->on_ack(seg);
    } else {
        c.rcv->on_segment(seg);
    }
}

void Host::arm_tick() {
    if (tick_armed_ || !shim_ || !shim_->has_flows()) return;
    const SimTime period = run_.shim_cfg.tick_period;
    const SimTime next = (run_.sim.now() / period + 1) * period;
    run_.sim.schedule(next, EventKind::TimerExpiry, entity_, 0, kTickTimer);
    tick_armed_ = true;
}

void Host::tick() {
    tick_armed_ = false;
    const SimTime now = run_.sim.now();
    auto out = shim_->on_tick(now);
    for (std::size_t i = 0; i < out.size(); ++i) {
        spoofs_.push_back(out[i]);
        run_.sim.schedule(now + i, EventKind::TimerExpiry, entity_, 0, kSpoofTimer);
    }
    arm_tick();
}

void Host::handle_event(const Event& ev) {
    switch (ev.kind) {
        case EventKind::PacketArrival:
            deliver(run_.net->take(static_cast<std::uint32_t>(ev.payload)));
            break;
        case EventKind::AppFlowStart:
            run_.start_flow(static_cast<std::uint32_t>(ev.payload));
            break;
        case EventKind::TimerExpiry:
            if (ev.aux == kTickTimer) {
                tick();
            } else if (ev.aux == kSpoofTimer) {
                Segment s = spoofs_.front();
                spoofs_.pop_front();
                // Spoofs enter the stack above the shim.
                const auto it = by_tuple_.find(s.tuple.reversed());
                if (it != by_tuple_.end() && it->second->snd) it->second->snd->on_ack(s);
            } else {
                Conn& c = *conns_.at(ev.aux - kFirstConnTimer);
                if (c.snd) {
                    c.snd->on_timer(ev.payload);
                } else {
                    c.rcv->on_timer(ev.payload);
                }
            }
            break;
        default:
            throw SimulationError("host received an unexpected event kind");
    }
}

// --- Run --------------------------------------------------------------------

Run::Run(const ExperimentConfig& c, const std::vector<FlowSpec>& schedule) : cfg(c), rngs(c.seed) {
    topo = build_topology(cfg);
    net = std::make_unique<Network>(sim, cfg.observer, cfg.frame_overhead);
    shim_cfg = cfg.shim;
    if (!(shim_cfg.default_rtt_us > 0)) shim_cfg.default_rtt_us = topo->base_rtt_us();
    if (shim_cfg.tick_period == 0) throw ConfigError("tick period must be at least 1 us");
    if (!(shim_cfg.alpha >= 1)) throw ConfigError("alpha must be >= 1");

    std::vector<EntityId> entities;
    for (HostId h = 0; h < topo->host_count(); ++h) {
        hosts.push_back(std::make_unique<Host>(*this, h));
        entities.push_back(hosts.back()->entity());
    }
    topo->build(*net, entities, cfg.aqm, rngs);

    sched_hash = schedule_hash(schedule);
    const std::uint64_t isn_salt = fnv1a64("isn") ^ mix64(cfg.seed);
    flows.reserve(schedule.size());
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const FlowSpec& f = schedule[i];
        if (f.src >= topo->host_count() || f.dst >= topo->host_count() || f.src == f.dst)
            throw ConfigError("flow " + std::to_string(f.flow_id) + " has invalid endpoints");
        FlowState st;
        st.spec = f;
        st.tuple = {host_ip(f.src), host_ip(f.dst), static_cast<std::uint16_t>(10000 + f.flow_id % 50000), 80};
        st.isn = static_cast<std::uint32_t>(mix64(isn_salt ^ f.flow_id));
        flows.push_back(st);
        if (!f.persistent()) ++finite_remaining;
        if (f.start < cfg.duration) {
            sim.schedule(f.start, EventKind::AppFlowStart, hosts[f.src]->entity(), i);
        }
    }
}

void Run::start_flow(std::uint32_t index) {
    FlowState& st = flows[index];
    const FlowSpec& f = st.spec;
    const auto fwd = net->add_path(topo->route(f.src, f.dst, st.tuple));
    const auto rev = net->add_path(topo->route(f.dst, f.src, st.tuple.reversed()));
    Conn& s = hosts[f.src]->add_conn(fwd, index, st.tuple);
    Conn& r = hosts[f.dst]->add_conn(rev, index, st.tuple.reversed());
    st.snd = &s;
    st.rcv = &r;
    r.rcv = std::make_unique<TcpReceiver>(r, cfg.tcp, f.flow_id, st.tuple.reversed(), r.slot);
    s.snd = std::make_unique<TcpSender>(s, cfg.tcp, f.flow_id, st.tuple, st.isn, s.slot);
    s.snd->connect();
    s.snd->app_send(f.persistent() ? kPersistentBacklog : f.size_bytes);
    if (!f.persistent()) s.snd->close();
}

void Run::completed(std::uint32_t index) {
    FlowState& st = flows[index];
    if (st.end) return;
    st.end = sim.now();
    if (--finite_remaining == 0 && cfg.stop_when_done) sim.stop();
}

bool Run::inject_drop(const Conn& c, const Segment& seg) {
    if (cfg.loss == LossInjection::None || seg.payload_len == 0 || seg.retransmission) return false;
    const FlowState& st = flows[c.flow_index];
    if (st.spec.persistent()) return false;
    const std::uint64_t off = static_cast<std::uint32_t>(seg.seq - st.isn - 1);
    const bool hit = cfg.loss == LossInjection::FlowTail ? off + seg.payload_len == st.spec.size_bytes : off == 0;
    if (hit) ++injected_drops;
    return hit;
}

RunResult Run::execute() {
    sim.run_until(cfg.duration);

    RunResult res;
    res.end_time = sim.now();
    res.schedule_hash = sched_hash;
    res.events_dispatched = sim.dispatched_count();
    res.base_rtt_us = topo->base_rtt_us();
    res.topology_description = topo->describe();
    res.injected_drops = injected_drops;
    res.packets_dropped = net->dropped() + injected_drops;
    res.packets_created = net->created();
    res.packets_delivered = net->delivered();
    res.packets_in_flight = net->in_flight();
    for (std::size_t p = 0; p < net->port_count(); ++p) res.packets_marked += net->port(static_cast<PortId>(p)).marked();
    for (auto& h : hosts) {
        if (h->shim()) res.shim += h->shim()->counters();
    }

    for (auto& st : flows) {
        FlowRecord r;
        r.flow_id = st.spec.flow_id;
        r.src = st.spec.src;
        r.dst = st.spec.dst;
        r.start = st.spec.start;
        r.round = st.spec.round;
        r.end = st.end;
        FlowDiagnostics d;
        d.flow_id = r.flow_id;
        if (st.snd) {
            TcpSender& s = *st.snd->snd;
            s.finalize();
            r.rto_events = s.rto_events();
            r.frr_events = s.frr_events();
            r.rack_assisted_frr_events = s.rack_assisted_frr_events();
            r.spoofed_acks_received = s.spoofed_acks_received();
            res.recoveries.insert(res.recoveries.end(), s.recoveries().begin(), s.recoveries().end());
            const TcpReceiver& rc = *st.rcv->rcv;
            d.delivered_bytes = rc.delivered_bytes();
            d.stream_intact = rc.stream_hash() == s.expected_stream_hash(rc.delivered_bytes());
            if (st.end && !st.spec.persistent()) d.stream_intact = d.stream_intact && rc.delivered_bytes() == st.spec.size_bytes;
            d.cwnd_trace_hash = s.cwnd_trace_hash();
            d.retransmissions = s.retransmissions();
        }
        if (st.spec.persistent()) {
            r.size_bytes = st.snd ? st.snd->snd->snd_una() : 0;
            r.size_class = SizeClass::Large;
        } else {
            r.size_bytes = st.spec.size_bytes;
            r.size_class = classify_size(r.size_bytes);
        }
        r.deadline_missed = misses_deadline(r, cfg.deadline, res.end_time);
        res.flows.push_back(r);
        res.diagnostics.push_back(d);
    }
    return res;
}

}  // namespace

std::uint64_t schedule_hash(const std::vector<FlowSpec>& flows) {
    std::uint64_t h = fnv1a64("schedule");
    for (const auto& f : flows) {
        h = mix64(h ^ f.flow_id);
        h = mix64(h ^ (static_cast<std::uint64_t>(f.src) << 32 | f.dst));
        h = mix64(h ^ f.size_bytes);
        h = mix64(h ^ f.start);
    }
    return h;
}

std::unique_ptr<Topology> build_topology(const ExperimentConfig& cfg) {
    if (cfg.topology == TopologyKind::LeafSpine) return std::make_unique<LeafSpine>(cfg.leafspine);
    DumbbellSpec d = cfg.dumbbell;
    switch (cfg.scenario) {
        case ScenarioKind::Case1:
        case ScenarioKind::Case2:
            d.n_senders = cfg.incast.n_senders();
            break;
        case ScenarioKind::Single:
            d.n_senders = 1;
            break;
        case ScenarioKind::Poisson:
            break;
    }
    return std::make_unique<Dumbbell>(d);
}

std::vector<FlowSpec> build_schedule(const ExperimentConfig& cfg, const Topology& topo) {
    switch (cfg.scenario) {
        case ScenarioKind::Case1:
        case ScenarioKind::Case2: {
            if (cfg.topology != TopologyKind::Dumbbell) throw ConfigError("incast scenarios need the dumbbell topology");
            IncastSpec s = cfg.incast;
            s.with_large = cfg.scenario == ScenarioKind::Case2;
            const auto& db = static_cast<const Dumbbell&>(topo);
            return gen_incast_schedule(s, db.receiver(), RngFactory(cfg.seed));
        }
        case ScenarioKind::Poisson: {
            const auto cdf = FlowSizeCdf::load_file(cfg.workload_cdf);
            return gen_poisson_flows(cfg.poisson, cdf, topo, RngFactory(cfg.seed));
        }
        case ScenarioKind::Single: {
            if (cfg.topology != TopologyKind::Dumbbell) throw ConfigError("the single scenario needs the dumbbell topology");
            FlowSpec f;
            f.src = 0;
            f.dst = static_cast<const Dumbbell&>(topo).receiver();
            f.size_bytes = cfg.single_bytes;
            return {f};
        }
    }
    return {};
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    if (c.scenario == ScenarioKind::Case2) c.incast.with_large = true;
    const auto topo = build_topology(c);
    return run_experiment(c, build_schedule(c, *topo));
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<FlowSpec>& schedule) {
    ExperimentConfig c = cfg;
    if (c.scenario == ScenarioKind::Case2) c.incast.with_large = true;
    Run run(c, schedule);
    return run.execute();
}

}  // namespace tracks
