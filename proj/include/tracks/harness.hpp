// Run directories: atomic output of one run, parameter sweeps, and
// re-deriving summaries from existing CSVs.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracks/config.hpp"
#include "tracks/experiment.hpp"

namespace tracks {

/// Output directory collision without the overwrite flag.
class OutputExistsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// $TRACKS_OUTPUT_ROOT, else "runs".
std::string default_output_root();

/// Writes flows.csv, recoveries.csv, shim_counters.txt, meta.txt and the
/// derived summaries into `dir`. Files go to a sibling temp directory that is
/// renamed into place at the end.
void write_run_dir(const std::string& dir, const Config& cfg, const RunResult& r, bool overwrite);

/// Validates, simulates and writes. Nothing is created on error.
RunResult run_to_dir(const Config& cfg, const std::string& dir, bool overwrite);

/// Regenerates the derived summaries of an existing run directory from its
/// CSVs and metadata.
void analyze_run_dir(const std::string& dir);

struct SweepPointStatus {
    std::string value;
    std::string dir;
    bool ok = false;
    std::string error;
};

/// One run per value of `key`, `workers` at a time, plus summary.csv. A
/// failing point is recorded and the sweep continues. An empty axis does
/// nothing.
std::vector<SweepPointStatus> run_sweep(const Config& base, const std::string& key,
                                        const std::vector<std::string>& values, const std::string& dir,
                                        bool overwrite, unsigned workers);

}  // namespace tracks
