#pragma once

#include "greenbp/rational.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace greenbp {

// Dense univariate polynomial over Q.  c[i] is the coefficient of x^i; the
// vector never ends in zeros (the zero polynomial has an empty vector).
struct Poly {
    std::vector<Rational> c;

    Poly() = default;
    explicit Poly(Rational constant) { if (constant != 0) c = {std::move(constant)}; }
    explicit Poly(std::vector<Rational> coeffs) : c(std::move(coeffs)) { trim(); }

    static Poly monomial(Rational coeff, size_t deg);
    static Poly x() { return monomial(1, 1); }

    void trim();
    bool is_zero() const { return c.empty(); }
    long degree() const { return static_cast<long>(c.size()) - 1; } // -1 for zero
    const Rational& lc() const { return c.back(); }
    Rational coeff(size_t i) const { return i < c.size() ? c[i] : Rational(0); }

    Poly operator-() const;
    Poly& operator+=(const Poly& o);
    Poly& operator-=(const Poly& o);
    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
    friend Poly operator*(const Poly& a, const Poly& b);
    Poly& operator*=(const Poly& o) { *this = *this * o; return *this; }
    Poly& operator*=(const Rational& s);
    friend Poly operator*(Poly a, const Rational& s) { return a *= s; }
    friend Poly operator*(const Rational& s, Poly a) { return a *= s; }
    bool operator==(const Poly& o) const { return c == o.c; }

    Rational eval(const Rational& x) const;
    Poly derivative() const;
    Poly pow(unsigned e) const;

    // a(s*x) and a(x/s); exact coefficient scaling
    Poly compose_scale(const Rational& s) const;

    std::string to_string(const std::string& var = "x") const;
};

// num/den in lowest terms with monic den (den != 0)
struct RationalFunction {
    Poly num;
    Poly den{Rational(1)};

    void reduce();
    bool is_zero() const { return num.is_zero(); }
    bool is_polynomial() const { return den.degree() == 0; }

    RationalFunction operator-() const { return {-num, den}; }
    friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator/(const RationalFunction& a, const RationalFunction& b);
    bool operator==(const RationalFunction& o) const { return num == o.num && den == o.den; }

    Rational eval(const Rational& x) const; // throws on pole
    RationalFunction compose_scale(const Rational& s) const;
    std::string to_string(const std::string& var = "x") const;
};

// quotient/remainder over the field Q; divisor must be nonzero
std::pair<Poly, Poly> poly_divmod(const Poly& a, const Poly& b);

// monic gcd
Poly poly_gcd(Poly a, Poly b);

// number of distinct real roots in the half-open interval (lo, hi], by Sturm
// chains.  Roots exactly at lo are not counted, roots at hi are.
int count_real_roots(const Poly& p, const Rational& lo, const Rational& hi);

// all rational roots with multiplicities, plus the root-free cofactor q:
// p = lc * prod (x - r_i)^{m_i} * q with q having no rational roots
struct RationalRoots {
    std::vector<std::pair<Rational, int>> roots;
    Poly cofactor;
};
RationalRoots rational_roots(const Poly& p);

// Lower bound on the modulus of every complex root of p (p(0) != 0 required):
// |z| >= |c0| / (|c0| + max_{i>=1} |ci|).  Exact rational arithmetic.
Rational root_modulus_lower_bound(const Poly& p);

// Convergence radius of the power-series expansion of num/den at 0, after the
// x^v factor of den is removed (den != 0).  nullopt means entire (den is a
// monomial).  The bound is the exact minimum modulus over rational poles and a
// certified lower bound for the irrational ones; it is exact whenever all
// poles are rational.
std::optional<Rational> expansion_radius(const Poly& den);

} // namespace greenbp
