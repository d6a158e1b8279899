#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "dora/price.hpp"
#include "dora/rng.hpp"

namespace dora {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FeedVariant {
    Timer,  // assigned weight 2f_d+1, collect until T_ds expires
    Async,  // assigned weight 3f_d+1, return once received weight >= 2f_d+1
};

enum class SourceKind { Honest, Byzantine, Crashed };

enum class SourceStrategy { Silent, ExtremeValue, RandomValue };

struct DataSourceSpec {
    DataSourceId id = 0;
    SourceKind kind = SourceKind::Honest;
    Price noise_half_width = 0;     // honest: uniform on [-w, +w] around the true value
    SourceStrategy strategy = SourceStrategy::Silent;  // byzantine only
    Price strategy_offset = 0;      // ExtremeValue: true value + offset
    Price strategy_lo = 0, strategy_hi = 0;  // RandomValue range
    std::uint32_t weight = 1;       // positive integer
    double availability = 1.0;      // probability of answering within T_ds

    bool counts_as_byzantine() const { return kind != SourceKind::Honest; }
};

struct Assignment {
    // per node, the assigned source ids (subset of the population)
    std::vector<std::vector<DataSourceId>> per_node;
};

std::uint32_t required_weight(FeedVariant variant, std::uint32_t f_d);

// Uniform random assignment: each node independently draws a uniformly
// random subset of sources whose total weight equals the variant
// requirement. Deterministic under `seed`.
Assignment assign_sources(std::uint32_t node_count, const std::vector<DataSourceSpec>& sources,
                          std::uint32_t f_d, FeedVariant variant, std::uint64_t seed);

// One subset draw, uniform over all subsets of total weight == target.
std::vector<DataSourceId> sample_weight_exact_subset(const std::vector<DataSourceSpec>& sources,
                                                     std::uint32_t target, Rng& rng);

using SimDuration = std::int64_t;

struct SourceResponse {
    DataSourceId source = 0;
    Price value = 0;
    SimDuration latency = 0;
    std::uint32_t weight = 1;
    bool byzantine = false;
};

struct FeedResult {
    std::vector<Price> observations;   // weight-expanded multiset
    SimDuration completion = 0;        // T_ds for timer variant; threshold-hit time for async
    std::uint32_t received_weight = 0;
    std::uint32_t byzantine_weight = 0;  // ground-truth diagnostic, not visible to the node
    bool low_honest_weight = false;      // |Obs| <= 2 * byzantine weight present
    bool completed = true;               // async variant may starve
    std::vector<SourceResponse> responses;
};

// Draws each assigned source's behavior for one collection round and applies
// the variant rule. `true_value` is the scenario ground truth for the round.
FeedResult get_data_feed(const std::vector<DataSourceId>& assigned,
                         const std::vector<DataSourceSpec>& sources, FeedVariant variant,
                         std::uint32_t f_d, SimDuration t_ds, Price true_value, Rng& rng);

// Lower median: element at index floor((n-1)/2) of the sorted multiset.
// Always an element of the input. Empty input -> nullopt (NoData).
std::optional<Price> robust_median(std::vector<Price> observations);

}  // namespace dora
