#include "dora/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dora/datasource.hpp"

namespace dora {

BigUint::BigUint(std::uint64_t v) {
    if (v) limbs_.push_back(v);
}

void BigUint::trim() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
}

BigUint& BigUint::operator+=(const BigUint& o) {
    using U128 = unsigned __int128;
    std::size_t n = std::max(limbs_.size(), o.limbs_.size());
    limbs_.resize(n, 0);
    std::uint64_t carry = 0;
    for (std::size_t i = 0; i < n; ++i) {
        U128 s = U128(limbs_[i]) + (i < o.limbs_.size() ? o.limbs_[i] : 0) + carry;
        limbs_[i] = static_cast<std::uint64_t>(s);
        carry = static_cast<std::uint64_t>(s >> 64);
    }
    if (carry) limbs_.push_back(carry);
    return *this;
}

BigUint& BigUint::operator-=(const BigUint& o) {
    using I128 = __int128;
    std::uint64_t borrow = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        I128 cur = I128(limbs_[i]) - (i < o.limbs_.size() ? o.limbs_[i] : 0) - borrow;
        if (cur < 0) {
            cur += (I128(1) << 64);
            borrow = 1;
        } else {
            borrow = 0;
        }
        limbs_[i] = static_cast<std::uint64_t>(cur);
    }
    trim();
    return *this;
}

BigUint BigUint::operator+(const BigUint& o) const {
    BigUint r = *this;
    r += o;
    return r;
}

BigUint BigUint::operator-(const BigUint& o) const {
    BigUint r = *this;
    r -= o;
    return r;
}

BigUint BigUint::operator*(const BigUint& o) const {
    using U128 = unsigned __int128;
    if (is_zero() || o.is_zero()) return BigUint();
    BigUint r;
    r.limbs_.assign(limbs_.size() + o.limbs_.size(), 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        std::uint64_t carry = 0;
        for (std::size_t j = 0; j < o.limbs_.size(); ++j) {
            U128 cur = U128(limbs_[i]) * o.limbs_[j] + r.limbs_[i + j] + carry;
            r.limbs_[i + j] = static_cast<std::uint64_t>(cur);
            carry = static_cast<std::uint64_t>(cur >> 64);
        }
        std::size_t k = i + o.limbs_.size();
        while (carry) {
            U128 cur = U128(r.limbs_[k]) + carry;
            r.limbs_[k] = static_cast<std::uint64_t>(cur);
            carry = static_cast<std::uint64_t>(cur >> 64);
            ++k;
        }
    }
    r.trim();
    return r;
}

BigUint& BigUint::operator*=(std::uint64_t m) {
    using U128 = unsigned __int128;
    if (m == 0) {
        limbs_.clear();
        return *this;
    }
    std::uint64_t carry = 0;
    for (auto& limb : limbs_) {
        U128 cur = U128(limb) * m + carry;
        limb = static_cast<std::uint64_t>(cur);
        carry = static_cast<std::uint64_t>(cur >> 64);
    }
    if (carry) limbs_.push_back(carry);
    return *this;
}

BigUint BigUint::operator*(std::uint64_t m) const {
    BigUint r = *this;
    r *= m;
    return r;
}

std::uint64_t BigUint::divmod_u64(std::uint64_t divisor) {
    using U128 = unsigned __int128;
    std::uint64_t rem = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        U128 cur = (U128(rem) << 64) | limbs_[i];
        limbs_[i] = static_cast<std::uint64_t>(cur / divisor);
        rem = static_cast<std::uint64_t>(cur % divisor);
    }
    trim();
    return rem;
}

int BigUint::compare(const BigUint& o) const {
    if (limbs_.size() != o.limbs_.size()) {
        return limbs_.size() < o.limbs_.size() ? -1 : 1;
    }
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        if (limbs_[i] != o.limbs_[i]) return limbs_[i] < o.limbs_[i] ? -1 : 1;
    }
    return 0;
}

double BigUint::to_double() const {
    double r = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        r = r * 18446744073709551616.0 + static_cast<double>(limbs_[i]);
    }
    return r;
}

std::string BigUint::to_string() const {
    if (is_zero()) return "0";
    BigUint tmp = *this;
    std::string out;
    while (!tmp.is_zero()) {
        std::uint64_t chunk = tmp.divmod_u64(1'000'000'000'000'000'000ULL);
        if (tmp.is_zero()) {
            out = std::to_string(chunk) + out;
        } else {
            char buf[20];
            std::snprintf(buf, sizeof(buf), "%018llu", static_cast<unsigned long long>(chunk));
            out = std::string(buf) + out;
        }
    }
    return out;
}

BigUint BigUint::binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return BigUint();
    if (k > n - k) k = n - k;
    BigUint result(1);
    for (std::uint64_t i = 1; i <= k; ++i) {
        result *= (n - k + i);
        std::uint64_t rem = result.divmod_u64(i);
        (void)rem;  // always divides evenly at each step
    }
    return result;
}

double Rational::to_double() const {
    if (num.is_zero()) return 0.0;
    // Scale into doubles limb-aware; good to ~1e-15 relative which is all
    // the CSV float column needs.
    double n = num.to_double();
    double d = den.to_double();
    if (std::isinf(n) || std::isinf(d)) {
        // take the top 15 digits of each side and track the dropped scale
        std::string ns = num.to_string(), ds = den.to_string();
        std::string np = ns.substr(0, 15), dp = ds.substr(0, 15);
        double approx = std::stod(np) / std::stod(dp);
        int exp10 = (static_cast<int>(ns.size()) - static_cast<int>(np.size())) -
                    (static_cast<int>(ds.size()) - static_cast<int>(dp.size()));
        return approx * std::pow(10.0, exp10);
    }
    return n / d;
}

std::string Rational::to_string() const {
    return num.to_string() + "/" + den.to_string();
}

bool Rational::operator==(const Rational& o) const {
    return num * o.den == o.num * den;
}

bool Rational::operator<(const Rational& o) const {
    return num * o.den < o.num * den;
}

bool Rational::operator<=(const Rational& o) const {
    return num * o.den <= o.num * den;
}

Rational rational_one_minus(const Rational& p) {
    Rational r;
    r.den = p.den;
    r.num = p.den - p.num;
    return r;
}

Rational family_all_byzantine_prob(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_a) {
    if (n_a == 0 || n_a > n_t || byz > n_t) throw ConfigError("invalid sampling counts");
    Rational r;
    r.num = BigUint::binomial(byz, n_a);
    r.den = BigUint::binomial(n_t, n_a);
    return r;
}

Rational clan_majority_fail_prob(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c) {
    if (n_c == 0 || n_c > n_t || byz > n_t) throw ConfigError("invalid sampling counts");
    std::uint32_t majority = n_c / 2;  // fail when j > floor(n_c / 2)
    BigUint numerator;
    for (std::uint32_t j = majority + 1; j <= std::min(n_c, byz); ++j) {
        if (n_c - j > n_t - byz) continue;
        numerator += BigUint::binomial(byz, j) * BigUint::binomial(n_t - byz, n_c - j);
    }
    Rational r;
    r.num = numerator;
    r.den = BigUint::binomial(n_t, n_c);
    return r;
}

Rational any_clan_fail_prob(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c,
                            std::uint32_t clans) {
    if (clans == 0 || n_c == 0 || byz > n_t) throw ConfigError("invalid sampling counts");
    if (std::uint64_t(clans) * n_c > n_t) {
        throw ConfigError("mutually exclusive clans exceed the tribe");
    }
    std::uint32_t majority = n_c / 2;

    // ways[b_used] = allocations of Byzantine nodes so far with every clan
    // held to <= majority Byzantine members
    std::vector<BigUint> good(byz + 1);
    good[0] = BigUint(1);
    BigUint total(1);
    std::uint32_t drawn = 0;
    for (std::uint32_t c = 0; c < clans; ++c) {
        std::uint32_t remaining_pool = n_t - drawn;
        total = total * BigUint::binomial(remaining_pool, n_c);
        std::vector<BigUint> next(byz + 1);
        for (std::uint32_t used = 0; used <= byz; ++used) {
            if (good[used].is_zero()) continue;
            std::uint32_t byz_left = byz - used;
            std::uint32_t honest_left = remaining_pool - byz_left;
            for (std::uint32_t j = 0; j <= std::min({majority, byz_left, n_c}); ++j) {
                if (n_c - j > honest_left) continue;
                next[used + j] += good[used] * BigUint::binomial(byz_left, j) *
                                  BigUint::binomial(honest_left, n_c - j);
            }
        }
        good = std::move(next);
        drawn += n_c;
    }
    BigUint good_total;
    for (auto& g : good) good_total += g;
    Rational ok;
    ok.num = good_total;
    ok.den = total;
    return rational_one_minus(ok);
}

namespace {

McEstimate finish_mc(std::uint64_t hits, std::uint64_t trials) {
    McEstimate e;
    e.trials = trials;
    e.p = trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
    e.stderr_ = trials ? std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(trials)) : 0.0;
    return e;
}

// Draws k of n without replacement into the front of `pool`, then undoes the
// swaps so the pool survives millions of trials without reallocation.
template <typename Fn>
void mc_draws(std::uint32_t n, std::uint32_t k, std::uint64_t trials, std::uint64_t seed,
              Fn&& per_trial) {
    Rng rng(seed);
    std::vector<std::uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0u);
    std::vector<std::uint32_t> swapped(k);
    for (std::uint64_t t = 0; t < trials; ++t) {
        for (std::uint32_t i = 0; i < k; ++i) {
            std::uint32_t j = i + static_cast<std::uint32_t>(rng.below(n - i));
            swapped[i] = j;
            std::swap(pool[i], pool[j]);
        }
        per_trial(pool);
        for (std::uint32_t i = k; i-- > 0;) std::swap(pool[i], pool[swapped[i]]);
    }
}

}  // namespace

McEstimate mc_family_all_byzantine(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_a,
                                   std::uint64_t trials, std::uint64_t seed) {
    std::uint64_t hits = 0;
    mc_draws(n_t, n_a, trials, seed, [&](const std::vector<std::uint32_t>& pool) {
        for (std::uint32_t i = 0; i < n_a; ++i) {
            if (pool[i] >= byz) return;  // nodes [0, byz) are the Byzantine ones
        }
        ++hits;
    });
    return finish_mc(hits, trials);
}

McEstimate mc_clan_majority_fail(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c,
                                 std::uint64_t trials, std::uint64_t seed) {
    std::uint64_t hits = 0;
    mc_draws(n_t, n_c, trials, seed, [&](const std::vector<std::uint32_t>& pool) {
        std::uint32_t b = 0;
        for (std::uint32_t i = 0; i < n_c; ++i) {
            if (pool[i] < byz) ++b;
        }
        if (b > n_c / 2) ++hits;
    });
    return finish_mc(hits, trials);
}

McEstimate mc_any_clan_fail(std::uint32_t n_t, std::uint32_t byz, std::uint32_t n_c,
                            std::uint32_t clans, std::uint64_t trials, std::uint64_t seed) {
    std::uint64_t hits = 0;
    mc_draws(n_t, clans * n_c, trials, seed, [&](const std::vector<std::uint32_t>& pool) {
        for (std::uint32_t c = 0; c < clans; ++c) {
            std::uint32_t b = 0;
            for (std::uint32_t i = 0; i < n_c; ++i) {
                if (pool[c * n_c + i] < byz) ++b;
            }
            if (b > n_c / 2) {
                ++hits;
                return;
            }
        }
    });
    return finish_mc(hits, trials);
}

std::uint64_t expected_message_count(const ComplexityParams& p, ProtocolPath path) {
    std::uint64_t feed_w = 2ULL * p.f_d + 1;
    if (path == ProtocolPath::Cc) {
        return feed_w * p.n_c + 3ULL * p.n_c * p.n_a + p.n_a;
    }
    // Fallback upper bound: trigger (VOTEFT from the clan plus FTPOSTs),
    // then a full tribe-level round.
    std::uint64_t trigger = std::uint64_t(p.n_c) * p.n_a + p.n_a;
    std::uint64_t tribe_round = feed_w * p.n_t + 3ULL * p.n_t * p.n_a + p.n_a;
    return trigger + tribe_round;
}

double BitComplexityPoint::vprop_constant() const {
    double denom = static_cast<double>(k + lambda) * n_c * n_c * n_a;
    return denom > 0 ? static_cast<double>(vprop_bytes) / denom : 0;
}

double BitComplexityPoint::total_constant() const {
    double denom = static_cast<double>(k + lambda) * n_c * n_c * n_a;
    return denom > 0 ? static_cast<double>(total_bytes) / denom : 0;
}

BitComplexityPoint measured_bit_complexity(const RunReport& report, std::uint32_t n_c,
                                           std::uint32_t n_a) {
    BitComplexityPoint p;
    p.n_c = n_c;
    p.n_a = n_a;
    p.k = std::max<std::uint64_t>(report.counters.max_value_msg_bytes, 32);
    p.lambda = report.counters.signature_wire_bytes;
    p.vprop_bytes = report.counters.bytes[Counters::VProp];
    p.total_bytes = report.counters.total_bytes();
    return p;
}

BitComplexityFit bit_complexity_fit(const std::vector<BitComplexityPoint>& points) {
    BitComplexityFit fit;
    fit.points = points;
    if (points.empty()) return fit;
    double sum = 0;
    for (const auto& p : points) sum += p.vprop_constant();
    fit.mean_vprop_constant = sum / static_cast<double>(points.size());
    for (const auto& p : points) {
        double rel = std::abs(p.vprop_constant() - fit.mean_vprop_constant) /
                     fit.mean_vprop_constant;
        fit.max_rel_deviation = std::max(fit.max_rel_deviation, rel);
    }
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        // allow 2% slack for per-run jitter in the grand-total ratio
        if (points[i + 1].total_constant() > points[i].total_constant() * 1.02) {
            fit.total_ratio_decreasing = false;
        }
    }
    return fit;
}

std::vector<DeviationRow> deviation_report(const RunReport& report, AgreementDistance d) {
    std::vector<DeviationRow> rows;
    for (const auto& r : report.rounds) {
        if (!r.concluded_all) continue;
        DeviationRow row;
        row.round = r.round;
        row.variable = r.variable;
        row.s = r.s;
        row.ideal = r.ideal;
        row.abs_error = r.abs_error;
        row.via_fallback = r.via == ConcludeVia::Fallback;
        if (row.via_fallback) {
            row.hmin = r.hmin_fb;
            row.hmax = r.hmax_fb;
            row.lo_widened = r.hmin_fb;
            row.hi_widened = r.hmax_fb;
        } else {
            row.hmin = r.hmin_cc;
            row.hmax = r.hmax_cc;
            row.lo_widened = r.hmin_cc - d.d;
            row.hi_widened = r.hmax_cc + d.d;
        }
        row.bound_violated = r.s < row.lo_widened || r.s > row.hi_widened;
        rows.push_back(row);
    }
    return rows;
}

std::string deviation_csv(const std::vector<DeviationRow>& rows) {
    std::ostringstream os;
    os << "round,variable,s,ideal,abs_error,hmin,hmax,lo_widened,hi_widened,via,violated\n";
    for (const auto& r : rows) {
        os << r.round << "," << r.variable << "," << r.s << "," << r.ideal << "," << r.abs_error
           << "," << r.hmin << "," << r.hmax << "," << r.lo_widened << "," << r.hi_widened << ","
           << (r.via_fallback ? "fallback" : "cc") << "," << (r.bound_violated ? 1 : 0) << "\n";
    }
    return os.str();
}

}  // namespace dora
