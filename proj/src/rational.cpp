#include "greenbp/rational.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace greenbp {

static std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

static Int parse_int_token(const std::string& tok) {
    std::string t = strip(tok);
    if (t.empty()) throw ParseError("empty integer token");
    size_t i = 0;
    if (t[i] == '+' || t[i] == '-') ++i;
    if (i == t.size()) throw ParseError("sign without digits in '" + tok + "'");
    for (; i < t.size(); ++i) {
        if (t[i] == '.')
            throw ParseError("decimal literals are not exact; write p/q (e.g. 1/2 instead of 0.5)");
        if (!std::isdigit(static_cast<unsigned char>(t[i])))
            throw ParseError("invalid integer token '" + tok + "'");
    }
    return Int(t);
}

Rational parse_rational(const std::string& s) {
    std::string t = strip(s);
    size_t slash = t.find('/');
    if (slash == std::string::npos) return Rational(parse_int_token(t));
    Int p = parse_int_token(t.substr(0, slash));
    Int q = parse_int_token(t.substr(slash + 1));
    if (q == 0) throw ParseError("zero denominator in '" + s + "'");
    return Rational(p, q);
}

std::string rat_to_string(const Rational& r) {
    std::string n = numer(r).str();
    if (denom(r) == 1) return n;
    return n + "/" + denom(r).str();
}

double rat_to_double(const Rational& r) { return static_cast<double>(r); }

std::string rat_to_decimal(const Rational& r, int sig_digits) {
    if (sig_digits < 1) sig_digits = 1;
    if (r == 0) return "0";
    bool neg = r < 0;
    Int p = boost::multiprecision::abs(numer(r));
    Int q = denom(r);

    // decimal exponent E with 10^E <= p/q < 10^(E+1)
    long E = static_cast<long>(p.str().size()) - static_cast<long>(q.str().size());
    auto cmp_pow = [&](long e) {
        // compare p/q against 10^e
        if (e >= 0) {
            Int rhs = q * boost::multiprecision::pow(Int(10), static_cast<unsigned>(e));
            return p.compare(rhs);
        }
        Int lhs = p * boost::multiprecision::pow(Int(10), static_cast<unsigned>(-e));
        return lhs.compare(q);
    };
    while (cmp_pow(E) < 0) --E;
    while (cmp_pow(E + 1) >= 0) ++E;

    // D = round(p/q * 10^(sig-1-E)), half away from zero
    long shift = sig_digits - 1 - E;
    Int num = p, den = q;
    if (shift >= 0) num *= boost::multiprecision::pow(Int(10), static_cast<unsigned>(shift));
    else den *= boost::multiprecision::pow(Int(10), static_cast<unsigned>(-shift));
    Int D = (2 * num + den) / (2 * den);
    Int limit = boost::multiprecision::pow(Int(10), static_cast<unsigned>(sig_digits));
    if (D >= limit) { D /= 10; ++E; }

    std::string digits = D.str();
    // strip trailing zeros (they carry no information after rounding)
    size_t last = digits.find_last_not_of('0');
    std::string kept = digits.substr(0, std::max<size_t>(last + 1, 1));

    std::string out;
    if (E >= -4 && E <= sig_digits + 2) {
        if (E >= 0) {
            if (static_cast<size_t>(E) + 1 >= kept.size()) {
                out = kept + std::string(E + 1 - kept.size(), '0');
            } else {
                out = kept.substr(0, E + 1) + "." + kept.substr(E + 1);
            }
        } else {
            out = "0." + std::string(-E - 1, '0') + kept;
        }
    } else {
        out = kept.substr(0, 1);
        if (kept.size() > 1) out += "." + kept.substr(1);
        out += "e" + std::to_string(E);
    }
    return neg ? "-" + out : out;
}

Rational rat_pow(const Rational& r, long e) {
    if (e == 0) return Rational(1);
    if (r == 0) {
        if (e < 0) throw std::domain_error("0 raised to a negative power");
        return Rational(0);
    }
    bool inv = e < 0;
    unsigned long k = inv ? static_cast<unsigned long>(-e) : static_cast<unsigned long>(e);
    Rational base = r, acc = 1;
    while (k) {
        if (k & 1) acc *= base;
        base *= base;
        k >>= 1;
    }
    return inv ? Rational(1) / acc : acc;
}

long rat_floor(const Rational& r) {
    Int p = numer(r), q = denom(r);
    Int fl = p / q;
    if (p < 0 && fl * q != p) --fl; // C++ division truncates toward zero
    if (fl > std::numeric_limits<long>::max() || fl < std::numeric_limits<long>::min())
        throw std::overflow_error("rat_floor overflow");
    return static_cast<long>(fl);
}

Rational rat_frac(const Rational& r) { return r - Rational(rat_floor(r)); }

long rat_to_long(const Rational& r) {
    if (!rat_is_integer(r)) throw std::invalid_argument("rat_to_long on non-integer " + rat_to_string(r));
    Int p = numer(r);
    if (p > std::numeric_limits<long>::max() || p < std::numeric_limits<long>::min())
        throw std::overflow_error("rat_to_long overflow");
    return static_cast<long>(p);
}

} // namespace greenbp
