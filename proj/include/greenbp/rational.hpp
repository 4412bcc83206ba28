#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <optional>
#include <stdexcept>
#include <string>

namespace greenbp {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Int numer(const Rational& r) { return boost::multiprecision::numerator(r); }
inline Int denom(const Rational& r) { return boost::multiprecision::denominator(r); }

// "p/q", "-3", "+12"; whitespace around tokens is tolerated.
Rational parse_rational(const std::string& s);

// "p/q" when q != 1, else "p".
std::string rat_to_string(const Rational& r);

// Decimal rendering with the given number of significant digits (round half
// away from zero, exact integer arithmetic, no floating point involved).
// Positional notation for moderate magnitudes, scientific otherwise.
std::string rat_to_decimal(const Rational& r, int sig_digits = 15);

double rat_to_double(const Rational& r);

// r^e for integer e (e < 0 requires r != 0).
Rational rat_pow(const Rational& r, long e);

// floor(r) as a plain long; throws on overflow of long.
long rat_floor(const Rational& r);

// r - floor(r), always in [0,1).
Rational rat_frac(const Rational& r);

inline bool rat_is_integer(const Rational& r) { return denom(r) == 1; }

// exact conversion to long; throws std::overflow_error / std::invalid_argument
long rat_to_long(const Rational& r);

} // namespace greenbp
