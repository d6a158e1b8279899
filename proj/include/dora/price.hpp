#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace dora {

// All observed values are carried as signed 64-bit micro-units (1e-6 of the
// quote currency). Sums over observation sets use a 128-bit accumulator so
// clan/tribe-sized aggregates never overflow.
using Price = std::int64_t;
using Wide = __int128;

constexpr std::int64_t kMicroUnitsPerUnit = 1'000'000;

struct AgreementDistance {
    Price d = 0;  // non-negative micro-unit delta

    constexpr bool valid() const { return d >= 0; }
};

using NodeId = std::uint32_t;
using DataSourceId = std::uint32_t;
using RoundId = std::uint64_t;
using VariableId = std::uint32_t;

// |a - b| without overflow for any pair of int64 prices.
inline Wide l1_distance(Price a, Price b) {
    Wide diff = static_cast<Wide>(a) - static_cast<Wide>(b);
    return diff < 0 ? -diff : diff;
}

inline bool l1_agree(Price a, Price b, AgreementDistance d) {
    return l1_distance(a, b) <= static_cast<Wide>(d.d);
}

// sum/count with ties rounded half to even. Exact on the integer grid, so
// every validator recomputes the same value.
Price round_half_even_div(Wide sum, std::int64_t count);

// Parses a decimal string ("19605.50") into exact micro-units. Fails on
// malformed input or more than six fractional digits of precision.
std::optional<Price> parse_price_decimal(const std::string& text);

// Inverse of parse_price_decimal, trailing zeros trimmed.
std::string format_price_decimal(Price value);

}  // namespace dora
