#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dora/netsim.hpp"

namespace dora {

// Arbitrary-precision unsigned integer, 64-bit limbs, little-endian.
// Just enough for exact hypergeometric tails over populations of a few
// hundred nodes; the log-scale probabilities make doubles unusable.
class BigUint {
  public:
    BigUint() = default;
    BigUint(std::uint64_t v);  // NOLINT: implicit by design

    static BigUint binomial(std::uint64_t n, std::uint64_t k);

    BigUint& operator+=(const BigUint& o);
    BigUint& operator-=(const BigUint& o);  // requires *this >= o
    BigUint operator+(const BigUint& o) const;
    BigUint operator-(const BigUint& o) const;
    BigUint operator*(const BigUint& o) const;
    BigUint& operator*=(std::uint64_t m);
    BigUint operator*(std::uint64_t m) const;

    // division by a small divisor; returns remainder
    std::uint64_t divmod_u64(std::uint64_t divisor);

    int compare(const BigUint& o) const;
    bool operator==(const BigUint& o) const { return compare(o) == 0; }
    bool operator<(const BigUint& o) const { return compare(o) < 0; }
    bool operator<=(const BigUint& o) const { return compare(o) <= 0; }

    bool is_zero() const { return limbs_.empty(); }
    double to_double() const;
    std::string to_string() const;

  private:
    void trim();
    std::vector<std::uint64_t> limbs_;
};

// Exact non-negative rational, kept unreduced. Comparisons cross-multiply.
struct Rational {
    BigUint num;
    BigUint den = BigUint(1);

    double to_double() const;
    std::string to_string() const;  // "num/den"

    bool operator==(const Rational& o) const;
    bool operator<(const Rational& o) const;
    bool operator<=(const Rational& o) const;
};

Rational rational_one_minus(const Rational& p);

// P(all n_a sampled aggregators are Byzantine) = C(b, n_a) / C(n_t, n_a).
Rational family_all_byzantine_prob(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_a);

// Hypergeometric upper tail: P(> floor(n_c / 2) Byzantine in the clan).
Rational clan_majority_fail_prob(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c);

// P(at least one of `clans` mutually exclusive clans of size n_c has a
// Byzantine majority), exact via DP over the allocation of Byzantine nodes.
Rational any_clan_fail_prob(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c,
                            std::uint32_t clans);

// Monte-Carlo counterparts for cross-checks.
struct McEstimate {
    double p = 0;
    double stderr_ = 0;
    std::uint64_t trials = 0;
};
McEstimate mc_family_all_byzantine(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_a,
                                   std::uint64_t trials, std::uint64_t seed);
McEstimate mc_clan_majority_fail(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c,
                                 std::uint64_t trials, std::uint64_t seed);
McEstimate mc_any_clan_fail(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c,
                            std::uint32_t clans, std::uint64_t trials, std::uint64_t seed);

struct ComplexityParams {
    std::uint64_t k = 0;       // message/hash size bound, bytes
    std::uint64_t lambda = 0;  // signature size, bytes
    std::uint32_t n_c = 0;
    std::uint32_t n_a = 0;
    std::uint32_t n_t = 0;
    std::uint32_t f_d = 0;
    std::uint32_t n_tau = 1;
};

enum class ProtocolPath { Cc, Fallback };

// Optimistic path: (2 f_d + 1) n_c + 3 n_c n_a + n_a, exact.
// Fallback path: itemized upper bound including the trigger messages.
std::uint64_t expected_message_count(const ComplexityParams& params, ProtocolPath path);

// Per-phase byte accounting from an instrumented run, and the quadratic-law
// fit constants; see bit_complexity_fit for the scaling assertion inputs.
struct BitComplexityPoint {
    std::uint32_t n_c = 0;
    std::uint32_t n_a = 0;
    std::uint64_t k = 0;
    std::uint64_t lambda = 0;
    std::uint64_t vprop_bytes = 0;
    std::uint64_t total_bytes = 0;

    double vprop_constant() const;  // vprop_bytes / ((k + lambda) n_c^2 n_a)
    double total_constant() const;
};

BitComplexityPoint measured_bit_complexity(const RunReport& report, std::uint32_t n_c,
                                           std::uint32_t n_a);

struct BitComplexityFit {
    std::vector<BitComplexityPoint> points;
    double mean_vprop_constant = 0;
    double max_rel_deviation = 0;  // of per-point vprop constants vs mean
    bool total_ratio_decreasing = true;  // grand-total/n_c^2 must not grow
};

BitComplexityFit bit_complexity_fit(const std::vector<BitComplexityPoint>& points);

// Per-round deviation report: |S - ideal|, the honest interval, the
// d-widened interval, and bound-violation flags.
struct DeviationRow {
    RoundId round = 0;
    VariableId variable = 0;
    Price s = 0;
    Price ideal = 0;
    std::int64_t abs_error = 0;
    Price hmin = 0, hmax = 0;
    Price lo_widened = 0, hi_widened = 0;
    bool via_fallback = false;
    bool bound_violated = false;
};

std::vector<DeviationRow> deviation_report(const RunReport& report, AgreementDistance d);
std::string deviation_csv(const std::vector<DeviationRow>& rows);

}  // namespace dora
