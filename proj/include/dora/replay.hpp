#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dora/datasource.hpp"
#include "dora/price.hpp"

namespace dora {

struct Tick {
    DataSourceId source = 0;
    std::int64_t timestamp_ms = 0;
    Price price = 0;

    bool operator==(const Tick& o) const = default;
};

struct IngestError {
    std::size_t line = 0;
    std::string reason;
};

struct IngestResult {
    std::vector<Tick> ticks;  // sorted by (timestamp, source)
    std::vector<IngestError> errors;
};

// CSV schema: header `source,timestamp_ms,price`; prices are decimal strings
// converted exactly to micro-units. Malformed rows are reported by line.
IngestResult ingest_csv(std::istream& in);
IngestResult ingest_csv_file(const std::string& path);

struct WindowSpec {
    std::int64_t width_seconds = 30;  // epoch-aligned windows
};

struct NodeRoundMedian {
    NodeId node = 0;
    bool has_value = false;
    Price median = 0;
    std::uint32_t sources_available = 0;
};

struct WindowRound {
    std::int64_t window_start_ms = 0;
    std::vector<NodeRoundMedian> medians;
};

struct SourceAvailability {
    DataSourceId source = 0;
    std::uint64_t windows = 0;
    std::uint64_t null_windows = 0;

    double null_pct() const {
        return windows ? 100.0 * static_cast<double>(null_windows) / windows : 0.0;
    }
};

struct ReplayRounds {
    std::vector<WindowRound> rounds;
    std::vector<SourceAvailability> availability;
};

// Per window and node: latest tick per assigned source, then the lower
// median. Nodes whose assigned sources are all silent abstain.
ReplayRounds window_rounds(const std::vector<Tick>& ticks, WindowSpec window,
                           const std::vector<std::vector<DataSourceId>>& assignment,
                           const std::vector<DataSourceId>& all_sources);

// Random n_pick-of-sources assignment per node (the empirical methodology's
// 5-of-7), deterministic under seed.
std::vector<std::vector<DataSourceId>> replay_assignment(std::uint32_t nodes,
                                                         const std::vector<DataSourceId>& sources,
                                                         std::uint32_t n_pick,
                                                         std::uint64_t seed);

struct SweepPoint {
    Price d_microunits = 0;
    double d_pct = 0;  // of the reference price
    std::uint64_t windows = 0;
    std::uint64_t clusters_formed = 0;
    double fraction = 0;
};

// For each d: the fraction of rounds in which some n_required node medians
// lie within d of each other.
std::vector<SweepPoint> cluster_formation_sweep(const ReplayRounds& rounds,
                                                std::uint32_t n_required,
                                                const std::vector<Price>& d_values,
                                                Price reference_price);

std::string sweep_points_csv(const std::vector<SweepPoint>& points);

// ---------------------------------------------------------------------------
// Synthetic tick generation: a piecewise-linear trajectory with per-source
// noise and availability, the stand-in for non-redistributable exchange data.

struct TrajectorySegment {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    Price start_price = 0;
    Price end_price = 0;
    std::int64_t noise_scale = 1;  // multiplies per-source noise inside the segment
};

struct SynthSourceSpec {
    DataSourceId id = 0;
    std::int64_t period_ms = 1000;  // one tick attempt per period
    double availability = 1.0;
    Price noise_half_width = 0;
};

struct SynthSpec {
    std::vector<TrajectorySegment> segments;
    std::vector<SynthSourceSpec> sources;
};

std::vector<Tick> synth_generate(const SynthSpec& spec, std::uint64_t seed);

std::string ticks_csv(const std::vector<Tick>& ticks);

}  // namespace dora
