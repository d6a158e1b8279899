#include "dora/price.hpp"

#include <cctype>
#include <cstdlib>

namespace dora {

Price round_half_even_div(Wide sum, std::int64_t count) {
    if (count <= 0) return 0;
    Wide n = sum;
    Wide d = count;
    bool neg = n < 0;
    Wide an = neg ? -n : n;
    Wide q = an / d;
    Wide r = an % d;
    Wide twice = r * 2;
    if (twice > d) {
        q += 1;
    } else if (twice == d) {
        if (q % 2 == 1) q += 1;  // half: round to even magnitude
    }
    return static_cast<Price>(neg ? -q : q);
}

std::optional<Price> parse_price_decimal(const std::string& text) {
    if (text.empty()) return std::nullopt;
    std::size_t i = 0;
    bool neg = false;
    if (text[i] == '-' || text[i] == '+') {
        neg = text[i] == '-';
        ++i;
    }
    if (i >= text.size()) return std::nullopt;

    Wide integral = 0;
    bool any_int = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        integral = integral * 10 + (text[i] - '0');
        if (integral > static_cast<Wide>(INT64_MAX)) return std::nullopt;
        any_int = true;
        ++i;
    }

    Wide frac = 0;
    int frac_digits = 0;
    bool any_frac = false;
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
            any_frac = true;
            int digit = text[i] - '0';
            if (frac_digits < 6) {
                frac = frac * 10 + digit;
                ++frac_digits;
            } else if (digit != 0) {
                return std::nullopt;  // sub-micro precision would be lossy
            }
            ++i;
        }
    }
    if (i != text.size()) return std::nullopt;
    if (!any_int && !any_frac) return std::nullopt;

    while (frac_digits < 6) {
        frac *= 10;
        ++frac_digits;
    }
    Wide total = integral * kMicroUnitsPerUnit + frac;
    if (total > static_cast<Wide>(INT64_MAX)) return std::nullopt;
    return static_cast<Price>(neg ? -total : total);
}

std::string format_price_decimal(Price value) {
    bool neg = value < 0;
    std::uint64_t mag = neg ? static_cast<std::uint64_t>(-(value + 1)) + 1
                            : static_cast<std::uint64_t>(value);
    std::uint64_t whole = mag / kMicroUnitsPerUnit;
    std::uint64_t frac = mag % kMicroUnitsPerUnit;
    std::string out = (neg ? "-" : "") + std::to_string(whole);
    if (frac != 0) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(frac));
        std::string f(buf);
        while (!f.empty() && f.back() == '0') f.pop_back();
        out += "." + f;
    }
    return out;
}

}  // namespace dora
