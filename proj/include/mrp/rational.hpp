#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrp {

using BigInt = boost::multiprecision::cpp_int;

/// Exact rational arithmetic for scores and accuracy aggregation. Values are
/// kept exact end to end; rounding happens only when formatting for display.
using Rational = boost::multiprecision::cpp_rational;

/// Parses a plain decimal literal ("0.914", "-3", "12.", ".5") into an exact
/// rational. Throws std::invalid_argument on anything else.
inline Rational rational_from_decimal(std::string_view s) {
    std::size_t pos = 0;
    bool negative = false;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        negative = s[pos] == '-';
        ++pos;
    }
    BigInt numerator = 0;
    BigInt denominator = 1;
    bool any_digit = false;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
        numerator = numerator * 10 + (s[pos] - '0');
        any_digit = true;
        ++pos;
    }
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            numerator = numerator * 10 + (s[pos] - '0');
            denominator *= 10;
            any_digit = true;
            ++pos;
        }
    }
    if (!any_digit || pos != s.size()) {
        throw std::invalid_argument("not a decimal literal: '" + std::string(s) + "'");
    }
    Rational value(numerator, denominator);
    return negative ? Rational(-value) : value;
}

/// Formats a rational as a fixed-point decimal with `places` fractional
/// digits, rounding half to even.
inline std::string format_fixed(const Rational& value, int places = 3) {
    BigInt scale = 1;
    for (int i = 0; i < places; ++i) {
        scale *= 10;
    }
    BigInt num = boost::multiprecision::numerator(value);
    const BigInt& den = boost::multiprecision::denominator(value); // > 0 by invariant
    const bool negative = num < 0;
    if (negative) {
        num = -num;
    }
    BigInt scaled = num * scale;
    BigInt quotient = scaled / den;
    BigInt remainder = scaled % den;
    BigInt twice = remainder * 2;
    if (twice > den || (twice == den && quotient % 2 != 0)) {
        ++quotient;
    }
    std::string digits = quotient.str();
    std::string int_part;
    std::string frac_part;
    if (static_cast<int>(digits.size()) <= places) {
        int_part = "0";
        frac_part = std::string(places - digits.size(), '0') + digits;
    } else {
        int_part = digits.substr(0, digits.size() - places);
        frac_part = digits.substr(digits.size() - places);
    }
    std::string out = negative && quotient != 0 ? "-" : "";
    out += int_part;
    if (places > 0) {
        out += "." + frac_part;
    }
    return out;
}

/// "num/den" in lowest terms, e.g. "2/3"; integers render without the "/1".
inline std::string to_fraction_string(const Rational& value) {
    const BigInt& den = boost::multiprecision::denominator(value);
    std::string out = boost::multiprecision::numerator(value).str();
    if (den != 1) {
        out += "/" + den.str();
    }
    return out;
}

} // namespace mrp
