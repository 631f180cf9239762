// FCT statistics, recovery-event histograms, CSV I/O and the fluid
// throughput model.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tracks/records.hpp"

namespace tracks {

extern const char* const kFlowCsvHeader;
extern const char* const kRecoveryCsvHeader;

/// Run-level collection of flow rows; a repeated flow_id throws
/// std::logic_error.
class FlowDataset {
  public:
    void record_flow(const FlowRecord& r);
    const std::vector<FlowRecord>& records() const { return rows_; }

  private:
    std::vector<FlowRecord> rows_;
    std::unordered_set<std::uint32_t> ids_;
};

/// Small flows only, strict comparison. Truncated small flows miss when the
/// run ended more than `deadline` after they started.
bool misses_deadline(const FlowRecord& r, SimTime deadline, SimTime run_end);

/// Nearest-rank percentile of an ascending sample; p in (0, 100].
double nearest_rank(const std::vector<double>& sorted, double p);
std::vector<double> completed_fcts(const std::vector<FlowRecord>& rows, std::optional<SizeClass> cls);
/// Empty when no completed flow matches.
std::vector<std::pair<double, double>> fct_percentiles(const std::vector<FlowRecord>& rows,
                                                       std::optional<SizeClass> cls,
                                                       const std::vector<double>& ps);
std::optional<double> mean_fct(const std::vector<FlowRecord>& rows, std::optional<SizeClass> cls);

/// 10 bins of width 0.1: (0.9, 1.0] is bin 9; 0 falls in bin 0.
int fraction_bin(double f);

struct FractionHistogram {
    std::array<double, 10> mass{};
    std::size_t events = 0;
};

struct RecoverySummary {
    // index 0: FRR, 1: RTO
    std::array<FractionHistogram, 2> burst;
    std::array<FractionHistogram, 2> loss_index;
    std::array<std::vector<double>, 2> cwnd;  // ascending
};

RecoverySummary classify_recovery(const std::vector<RecoveryEvent>& events);

struct FluidThroughput {
    double rho_star;
    double rho;
};

/// Ideal vs timeout-inflated throughput (bits/s) of a B-bit transfer sharing
/// capacity C with N flows. Throws std::domain_error on invalid inputs.
FluidThroughput fluid_throughput(double B, double N, double C, double n, double tau, double rto,
                                 double n_prime, double tau_prime);

std::string format_double(double v);

void write_flow_csv(std::ostream& os, const std::vector<FlowRecord>& rows);
void write_recovery_csv(std::ostream& os, const std::vector<RecoveryEvent>& events);
/// Throws ConfigError on a malformed file.
std::vector<FlowRecord> read_flow_csv(std::istream& is, const std::string& origin);
std::vector<RecoveryEvent> read_recovery_csv(std::istream& is, const std::string& origin);

/// `fct_us,cum_fraction` rows over completed flows of a class.
void write_fct_cdf(std::ostream& os, const std::vector<FlowRecord>& rows);
/// Per incast round: mean small-flow FCT and counts.
void write_round_summary(std::ostream& os, const std::vector<FlowRecord>& rows);
void write_recovery_histograms(std::ostream& os, const RecoverySummary& s);
void write_cwnd_cdf(std::ostream& os, const RecoverySummary& s);

}  // namespace tracks
