// Per-flow and per-recovery outcome rows.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tracks/sim.hpp"

namespace tracks {

enum class SizeClass : std::uint8_t { Small, Medium, Large };

constexpr std::uint64_t kSmallFlowLimit = 100'000;      // inclusive
constexpr std::uint64_t kMediumFlowLimit = 10'000'000;  // inclusive

/// Small iff <= 100 KB, Medium iff <= 10 MB, otherwise Large.
SizeClass classify_size(std::uint64_t bytes);
const char* to_string(SizeClass c);
std::optional<SizeClass> parse_size_class(const std::string& s);

enum class RecoveryKind : std::uint8_t { Frr, Rto };
const char* to_string(RecoveryKind k);

struct FlowRecord {
    std::uint32_t flow_id = 0;
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint64_t size_bytes = 0;
    SizeClass size_class = SizeClass::Small;
    SimTime start = 0;
    std::optional<SimTime> end;  // empty: truncated at run end
    std::uint32_t rto_events = 0;
    std::uint32_t frr_events = 0;
    std::uint32_t rack_assisted_frr_events = 0;
    std::uint32_t spoofed_acks_received = 0;
    bool deadline_missed = false;
    std::uint32_t round = 0;  // incast round, 0 for Poisson workloads

    bool completed() const { return end.has_value(); }
    std::optional<SimTime> fct() const {
        if (!end) return std::nullopt;
        return *end - start;
    }
};

struct RecoveryEvent {
    std::uint32_t flow_id = 0;
    RecoveryKind kind = RecoveryKind::Frr;
    double cwnd_mss = 0;             // cwnd when the first lost segment was sent
    double loss_index_fraction = 0;  // position of that segment in its window
    double burst_fraction = 0;       // retransmitted span / cwnd
    SimTime recovery_duration = 0;   // last transmission -> retransmission
};

}  // namespace tracks
