// Flow schedules: incast rounds on the dumbbell and CDF-driven Poisson
// arrivals on the leaf-spine.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tracks/records.hpp"
#include "tracks/sim.hpp"
#include "tracks/topology.hpp"

namespace tracks {

constexpr std::uint64_t kPersistentFlow = std::numeric_limits<std::uint64_t>::max();

struct FlowSpec {
    std::uint32_t flow_id = 0;
    HostId src = 0;
    HostId dst = 0;
    std::uint64_t size_bytes = 0;  // kPersistentFlow: sends until the run ends
    SimTime start = 0;
    std::uint32_t round = 0;

    bool persistent() const { return size_bytes == kPersistentFlow; }
};

class FlowSizeCdf {
  public:
    /// Text format: one `<size_bytes> <cumulative_prob>` per line, `#`
    /// comments. Throws ConfigError on malformed input.
    static FlowSizeCdf parse(const std::string& text, const std::string& origin = "<cdf>");
    static FlowSizeCdf load_file(const std::string& path);
    explicit FlowSizeCdf(std::vector<std::pair<double, double>> points);

    /// Inverse CDF with linear interpolation; u below the first probability
    /// maps to the first size.
    double inverse(double u) const;
    std::uint64_t sample(RngStream& rng) const;
    double mean() const;
    const std::vector<std::pair<double, double>>& points() const { return pts_; }

  private:
    std::vector<std::pair<double, double>> pts_;
};

struct IncastSpec {
    std::uint32_t n_small = 20;
    std::uint32_t rounds = 5;
    SimTime round_interval = 3 * kSec;
    std::uint64_t small_bytes = 14'600;
    double mean_gap_us = 12;   // one data frame at the bottleneck rate
    bool with_large = false;   // large flows alongside the small ones
    std::uint32_t small_per_large = 3;

    std::uint32_t n_large() const {
        return with_large ? (n_small + small_per_large - 1) / small_per_large : 0;
    }
    std::uint32_t n_senders() const { return n_small + n_large(); }
};

/// One round: every small sender starts once, in a random order, with
/// exponential gaps. Ids start at `first_id`.
std::vector<FlowSpec> gen_incast_round(const IncastSpec& spec, std::uint32_t round, HostId receiver,
                                       RngStream& gaps, RngStream& order, std::uint32_t first_id);
/// All rounds plus, when enabled, the persistent large flows (ids first).
std::vector<FlowSpec> gen_incast_schedule(const IncastSpec& spec, HostId receiver, const RngFactory& rngs);

enum class TrafficPattern : std::uint8_t { AllToAll, OneToAll };

struct PoissonSpec {
    double load = 0.5;
    TrafficPattern pattern = TrafficPattern::AllToAll;
    SimTime window = 1 * kSec;  // arrivals in [0, window)
};

/// Flows per second.
double poisson_rate(double load, double capacity_bps, double mean_bytes);
std::vector<FlowSpec> gen_poisson_flows(const PoissonSpec& spec, const FlowSizeCdf& cdf,
                                        const Topology& topo, const RngFactory& rngs);

/// Deterministic in-place Fisher-Yates.
template <class T>
void shuffle_in_place(std::vector<T>& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace tracks
