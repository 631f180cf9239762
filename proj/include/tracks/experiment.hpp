// Wires topology, hosts (endpoints + shim), and a flow schedule into one
// simulation run.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tracks/metrics.hpp"
#include "tracks/records.hpp"
#include "tracks/shim.hpp"
#include "tracks/tcp.hpp"
#include "tracks/topology.hpp"
#include "tracks/workload.hpp"

namespace tracks {

enum class ScenarioKind : std::uint8_t { Case1, Case2, Poisson, Single };
enum class TopologyKind : std::uint8_t { Dumbbell, LeafSpine };
/// Constructed-loss modes: drop the first transmission of each flow's last
/// (tail) or first (head) data segment.
enum class LossInjection : std::uint8_t { None, FlowTail, FlowHead };

struct ExperimentConfig {
    ScenarioKind scenario = ScenarioKind::Case1;
    TopologyKind topology = TopologyKind::Dumbbell;
    DumbbellSpec dumbbell;
    LeafSpineSpec leafspine;
    FabricAqm aqm;
    TcpConfig tcp;
    bool shim_enabled = true;
    ShimConfig shim;  // default_rtt_us <= 0: use the topology's base RTT
    IncastSpec incast;
    PoissonSpec poisson;
    std::string workload_cdf;  // file path (Poisson)
    std::uint64_t single_bytes = 2 * kDefaultMss;
    LossInjection loss = LossInjection::None;
    std::uint32_t frame_overhead = 0;  // extra wire bytes per frame
    std::uint64_t seed = 1;
    SimTime duration = 15 * kSec;
    SimTime deadline = 200 * kMsec;
    bool stop_when_done = true;
    Observer* observer = nullptr;  // not owned
};

struct FlowDiagnostics {
    std::uint32_t flow_id = 0;
    std::uint64_t delivered_bytes = 0;
    bool stream_intact = true;  // receiver fingerprint matches the sent stream
    std::uint64_t cwnd_trace_hash = 0;
    std::uint32_t retransmissions = 0;
};

struct RunResult {
    std::vector<FlowRecord> flows;
    std::vector<RecoveryEvent> recoveries;
    std::vector<FlowDiagnostics> diagnostics;
    ShimCounters shim;
    std::uint64_t schedule_hash = 0;
    SimTime end_time = 0;
    std::uint64_t events_dispatched = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t packets_marked = 0;
    std::uint64_t injected_drops = 0;
    // fabric packet accounting at run end (injected drops never enter it)
    std::uint64_t packets_created = 0;
    std::uint64_t packets_delivered = 0;
    std::uint64_t packets_in_flight = 0;
    double base_rtt_us = 0;
    std::string topology_description;
};

std::uint64_t schedule_hash(const std::vector<FlowSpec>& flows);

/// Builds the flow schedule for `cfg` (same seed => same schedule regardless
/// of shim, TCP or AQM settings).
std::vector<FlowSpec> build_schedule(const ExperimentConfig& cfg, const Topology& topo);
std::unique_ptr<Topology> build_topology(const ExperimentConfig& cfg);

/// Runs one simulation. Throws ConfigError for invalid settings and
/// SimulationError for engine faults.
RunResult run_experiment(const ExperimentConfig& cfg);
/// Same, with an explicit schedule (constructed scenarios).
RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<FlowSpec>& schedule);

}  // namespace tracks
