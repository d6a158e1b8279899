#include "dora/datasource.hpp"

#include <algorithm>
#include <numeric>

namespace dora {

namespace {

using U128 = unsigned __int128;

// Uniform in [0, n) for 128-bit n.
U128 below_u128(Rng& rng, U128 n) {
    if (n <= 1) return 0;
    U128 threshold = (U128(0) - n) % n;
    for (;;) {
        U128 r = (U128(rng.next_u64()) << 64) | rng.next_u64();
        if (r >= threshold) return r % n;
    }
}

}  // namespace

std::uint32_t required_weight(FeedVariant variant, std::uint32_t f_d) {
    return variant == FeedVariant::Timer ? 2 * f_d + 1 : 3 * f_d + 1;
}

std::vector<DataSourceId> sample_weight_exact_subset(const std::vector<DataSourceSpec>& sources,
                                                     std::uint32_t target, Rng& rng) {
    const std::size_t n = sources.size();
    if (n > 120) throw ConfigError("too many data sources for exact subset sampling");

    // count[i][w] = subsets of sources[i..) with total weight w
    std::vector<std::vector<U128>> count(n + 1, std::vector<U128>(target + 1, 0));
    count[n][0] = 1;
    for (std::size_t i = n; i-- > 0;) {
        std::uint32_t w = sources[i].weight;
        for (std::uint32_t t = 0; t <= target; ++t) {
            U128 c = count[i + 1][t];
            if (w <= t) c += count[i + 1][t - w];
            count[i][t] = c;
        }
    }
    if (count[0][target] == 0) {
        throw ConfigError("no source subset reaches the required total weight");
    }

    std::vector<DataSourceId> chosen;
    std::uint32_t remaining = target;
    for (std::size_t i = 0; i < n && remaining > 0; ++i) {
        std::uint32_t w = sources[i].weight;
        U128 with = (w <= remaining) ? count[i + 1][remaining - w] : 0;
        U128 total = count[i][remaining];
        if (with > 0 && below_u128(rng, total) < with) {
            chosen.push_back(sources[i].id);
            remaining -= w;
        }
    }
    return chosen;
}

Assignment assign_sources(std::uint32_t node_count, const std::vector<DataSourceSpec>& sources,
                          std::uint32_t f_d, FeedVariant variant, std::uint64_t seed) {
    std::uint32_t target = required_weight(variant, f_d);
    std::uint32_t total = 0;
    for (const auto& s : sources) {
        if (s.weight == 0) throw ConfigError("source weight must be >= 1");
        total += s.weight;
    }
    if (total < target) throw ConfigError("insufficient total source weight for variant");

    Assignment out;
    out.per_node.resize(node_count);
    for (std::uint32_t node = 0; node < node_count; ++node) {
        Rng stream = Rng::stream(seed, 0xA551u, node);
        out.per_node[node] = sample_weight_exact_subset(sources, target, stream);
    }
    return out;
}

FeedResult get_data_feed(const std::vector<DataSourceId>& assigned,
                         const std::vector<DataSourceSpec>& sources, FeedVariant variant,
                         std::uint32_t f_d, SimDuration t_ds, Price true_value, Rng& rng) {
    FeedResult result;

    auto spec_of = [&](DataSourceId id) -> const DataSourceSpec* {
        for (const auto& s : sources) {
            if (s.id == id) return &s;
        }
        return nullptr;
    };

    std::vector<SourceResponse> responses;
    for (DataSourceId id : assigned) {
        const DataSourceSpec* spec = spec_of(id);
        if (!spec) continue;
        SourceResponse r;
        r.source = id;
        r.weight = spec->weight;
        r.byzantine = spec->counts_as_byzantine();
        switch (spec->kind) {
            case SourceKind::Crashed:
                continue;
            case SourceKind::Honest: {
                if (!rng.chance(spec->availability)) continue;
                Price noise = spec->noise_half_width > 0
                                  ? rng.between(-spec->noise_half_width, spec->noise_half_width)
                                  : 0;
                r.value = true_value + noise;
                break;
            }
            case SourceKind::Byzantine: {
                switch (spec->strategy) {
                    case SourceStrategy::Silent:
                        continue;
                    case SourceStrategy::ExtremeValue:
                        r.value = true_value + spec->strategy_offset;
                        break;
                    case SourceStrategy::RandomValue:
                        r.value = rng.between(spec->strategy_lo, spec->strategy_hi);
                        break;
                }
                break;
            }
        }
        r.latency = rng.between(1, std::max<SimDuration>(1, t_ds));
        responses.push_back(r);
    }
    std::sort(responses.begin(), responses.end(), [](const SourceResponse& a, const SourceResponse& b) {
        return std::tie(a.latency, a.source) < std::tie(b.latency, b.source);
    });

    std::uint32_t stop_weight =
        variant == FeedVariant::Async ? 2 * f_d + 1 : 0;  // async stops at 2f_d+1

    result.completion = variant == FeedVariant::Timer ? t_ds : 0;
    for (const auto& r : responses) {
        if (variant == FeedVariant::Async && result.received_weight >= stop_weight) break;
        result.responses.push_back(r);
        result.received_weight += r.weight;
        if (r.byzantine) result.byzantine_weight += r.weight;
        for (std::uint32_t c = 0; c < r.weight; ++c) result.observations.push_back(r.value);
        if (variant == FeedVariant::Async) result.completion = r.latency;
    }
    if (variant == FeedVariant::Async && result.received_weight < stop_weight) {
        result.completed = false;
        result.completion = t_ds;
    }
    result.low_honest_weight =
        result.received_weight <= 2 * result.byzantine_weight;
    return result;
}

std::optional<Price> robust_median(std::vector<Price> observations) {
    if (observations.empty()) return std::nullopt;
    std::sort(observations.begin(), observations.end());
    return observations[(observations.size() - 1) / 2];
}

}  // namespace dora
