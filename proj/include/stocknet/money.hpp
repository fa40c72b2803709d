#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "stocknet/format.hpp"

namespace stocknet {

// Currency amounts are held as integer cents so that aggregation is exact.
using Cents = std::int64_t;

// Parses a decimal currency string to cents. Accepts an optional sign and at
// most two fractional digits beyond which the value is rounded half-up on the
// third digit. Returns nullopt on malformed input.
inline std::optional<Cents> parse_cents(std::string_view s) {
    if (s.empty()) return std::nullopt;
    bool neg = false;
    std::size_t i = 0;
    if (s[0] == '+' || s[0] == '-') {
        neg = s[0] == '-';
        i = 1;
    }
    if (i >= s.size()) return std::nullopt;
    std::int64_t whole = 0;
    bool any_digit = false;
    for (; i < s.size() && s[i] != '.'; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        if (whole > (INT64_MAX - 9) / 10) return std::nullopt;
        whole = whole * 10 + (s[i] - '0');
        any_digit = true;
    }
    std::int64_t frac = 0;   // in cents
    if (i < s.size()) {      // saw '.'
        ++i;
        int ndig = 0;
        int round_digit = -1;
        for (; i < s.size(); ++i, ++ndig) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            int d = s[i] - '0';
            if (ndig == 0) frac += 10 * d;
            else if (ndig == 1) frac += d;
            else if (ndig == 2) round_digit = d;
            any_digit = true;
        }
        if (round_digit >= 5) frac += 1;
    }
    if (!any_digit) return std::nullopt;
    if (whole > (INT64_MAX - frac) / 100) return std::nullopt;
    Cents c = whole * 100 + frac;
    return neg ? -c : c;
}

// Formats cents as a decimal currency string ("1234.50" -> "1234.5", "100" -> "1").
inline std::string format_cents(Cents c) {
    bool neg = c < 0;
    std::uint64_t v = neg ? static_cast<std::uint64_t>(-(c + 1)) + 1 : static_cast<std::uint64_t>(c);
    std::uint64_t whole = v / 100;
    std::uint64_t frac = v % 100;
    std::string s = neg ? "-" : "";
    s += fmt_int(static_cast<std::int64_t>(whole));
    if (frac != 0) {
        s += '.';
        s += static_cast<char>('0' + frac / 10);
        if (frac % 10 != 0) s += static_cast<char>('0' + frac % 10);
    }
    return s;
}

// Currency in natural units for emission in reports.
inline double cents_to_units(Cents c) { return static_cast<double>(c) / 100.0; }

} // namespace stocknet
