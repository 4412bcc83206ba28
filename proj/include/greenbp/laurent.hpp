#pragma once

#include "greenbp/poly.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace greenbp {

struct LogObstruction : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncationExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Finite sum of c_e * x^e with exact rational exponents e (no zero terms).
// This is the exact, closed-under-multiplication fragment: coefficients of
// kernels, monomial forcings, fractional-power test data.
struct GenLaurentPoly {
    std::map<Rational, Rational> t;

    GenLaurentPoly() = default;
    static GenLaurentPoly monomial(const Rational& coeff, const Rational& expo);
    static GenLaurentPoly constant(const Rational& c) { return monomial(c, 0); }
    static GenLaurentPoly from_poly(const Poly& p);

    bool is_zero() const { return t.empty(); }
    Rational coeff(const Rational& e) const;
    // lowest exponent; throws on zero
    Rational order() const;

    GenLaurentPoly operator-() const;
    friend GenLaurentPoly operator+(const GenLaurentPoly& a, const GenLaurentPoly& b);
    friend GenLaurentPoly operator-(const GenLaurentPoly& a, const GenLaurentPoly& b);
    friend GenLaurentPoly operator*(const GenLaurentPoly& a, const GenLaurentPoly& b);
    GenLaurentPoly& operator+=(const GenLaurentPoly& o) { return *this = *this + o; }
    GenLaurentPoly& operator-=(const GenLaurentPoly& o) { return *this = *this - o; }
    GenLaurentPoly& operator*=(const GenLaurentPoly& o) { return *this = *this * o; }
    GenLaurentPoly scaled(const Rational& s) const;
    bool operator==(const GenLaurentPoly& o) const { return t == o.t; }

    GenLaurentPoly derivative() const;
    // exact value; requires every exponent integral (else the value is
    // irrational) -- use eval_double for fractional exponents
    Rational eval(const Rational& x) const;
    double eval_double(double x) const;

    std::string to_string(const std::string& var = "x") const;
};

// One ramification class: x^mu * sum_{k >= N} a[k-N] * x^k with mu in [0,1).
//
// Exactness bookkeeping: if top is empty the stored coefficients are the
// complete expansion (a Laurent polynomial).  Otherwise coefficients are
// exact for k < *top, unknown from *top on; a.size() == *top - N.  Below N
// everything is exactly zero.  radius is a certified lower bound on the
// convergence radius (empty = entire).
struct GenLaurentSeries {
    Rational mu;
    long N = 0;
    std::vector<Rational> a;
    std::optional<long> top;
    std::optional<Rational> radius;

    bool is_exact() const { return !top.has_value(); }
    void normalize();
    Rational coeff(long k) const; // throws TruncationExceeded past the window
};

// Finite sum of ramification classes, the working element type of the
// coefficient field.
struct GenLaurentElement {
    std::map<Rational, GenLaurentSeries> comp;

    static GenLaurentElement zero() { return {}; }
    static GenLaurentElement from_laurent_poly(const GenLaurentPoly& p);
    static GenLaurentElement monomial(const Rational& coeff, const Rational& expo);

    bool is_zero() const;       // no known-nonzero coefficient anywhere
    bool is_exact() const;
    bool is_exactly_zero() const { return is_zero() && is_exact(); }
    // exact elements convert back to a Laurent polynomial
    GenLaurentPoly to_laurent_poly() const;

    void normalize();
    GenLaurentElement operator-() const;
    std::optional<Rational> min_radius() const;

    std::string to_string(int max_terms = 12) const;
};

GenLaurentElement element_add(const GenLaurentElement& a, const GenLaurentElement& b);
GenLaurentElement element_sub(const GenLaurentElement& a, const GenLaurentElement& b);
GenLaurentElement element_mul(const GenLaurentElement& a, const GenLaurentElement& b);
GenLaurentElement element_scalar(const GenLaurentElement& a, const Rational& s);

inline GenLaurentElement operator+(const GenLaurentElement& a, const GenLaurentElement& b) { return element_add(a, b); }
inline GenLaurentElement operator-(const GenLaurentElement& a, const GenLaurentElement& b) { return element_sub(a, b); }
inline GenLaurentElement operator*(const GenLaurentElement& a, const GenLaurentElement& b) { return element_mul(a, b); }
inline GenLaurentElement operator*(const GenLaurentElement& a, const Rational& s) { return element_scalar(a, s); }
inline GenLaurentElement operator*(const Rational& s, const GenLaurentElement& a) { return element_scalar(a, s); }

// structural equality of the known parts (same windows, same coefficients)
bool element_equal(const GenLaurentElement& a, const GenLaurentElement& b);
// equality of known coefficients on the common window; unknown tails ignored
bool element_equal_window(const GenLaurentElement& a, const GenLaurentElement& b);

// Expansion of a rational function at 0 through exponent `upto` inclusive.
// Exact (tail-free) when the denominator is c*x^v; otherwise the radius is
// the certified pole-distance bound.
GenLaurentElement laurent_expand(const RationalFunction& rf, long upto);

GenLaurentElement differentiate(const GenLaurentElement& u);
GenLaurentElement differentiate(const GenLaurentElement& u, int times);

// The integral from 1 to x, termwise antiderivative minus its value at 1.
// A residue (exponent -1 term) would leave the algebra: LogObstruction.
// With drop_residue the offending term is discarded instead (callers that do
// this track the log coefficient separately).
//
// For truncated inputs every output coefficient below the shifted window top
// is exact EXCEPT the constant term, which absorbs the unknown tail of the
// antiderivative's value at 1.
GenLaurentElement integrate_rb(const GenLaurentElement& u, bool drop_residue = false);

// coefficient of x^{-1} in the mu = 0 class (what integrate_rb would trip on)
Rational residue_coefficient(const GenLaurentElement& u);

enum class ComponentPart { pp, reg, indicial };
GenLaurentElement project_component(const GenLaurentElement& u, ComponentPart which,
                                    const Rational& mu = Rational(0));

// c_{k+mu}: coefficient functional; exact; throws TruncationExceeded when the
// window does not reach k
Rational coeff_extract(const GenLaurentElement& u, long k, const Rational& mu);

// Cap the known window at exponent `upto` inclusive, marking the element
// truncated beyond it (exact inputs pad intermediate zeros, which are genuine
// zeros).  The convergence radius is kept: the represented function is
// unchanged, only knowledge is discarded.
GenLaurentElement element_truncate(const GenLaurentElement& u, const Rational& upto);

// Multiplicative inverse, exact for monomials and a window through exponent
// `upto` otherwise (geometric series on the trailing part).  Needs a
// determinable leading term: an empty truncated window that could hide a
// lower-order term raises TruncationExceeded; zero raises domain_error.  The
// result radius is unknown (zeros of u are not located).
GenLaurentElement element_invert(const GenLaurentElement& u, const Rational& upto);

GenLaurentElement element_div(const GenLaurentElement& a, const GenLaurentElement& b,
                              const Rational& upto);

struct PartialValue {
    Rational value;
    std::optional<Rational> tail_bound; // empty = unknown (no usable radius)
};

// Partial-sum evaluation at rational x0 in (0,1].  The value is the exact sum
// of the stored terms (fractional powers x0^mu are enclosed to 2^-128 and the
// enclosure width is folded into the bound).  The tail bound uses the stored
// radius r and the window constant C = max |a_k| r^k, a heuristic-constant
// geometric bound: C * (x0/r)^top / (1 - x0/r).
PartialValue evaluate_partial(const GenLaurentElement& u, const Rational& x0);

double evaluate_partial_double(const GenLaurentElement& u, double x0);

// n(n-1)...(n-k+1) for rational n
Rational falling_factorial(const Rational& n, unsigned k);

// Element plus a log x payload: u = base + logpart * log x.  Closed under
// d/dx and (away from a log^2 escalation) under the integral from 1; enough
// for one integration layer over a Fuchsian kernel.
struct LogElement {
    GenLaurentElement base;
    GenLaurentElement logpart;

    bool log_free() const { return logpart.is_zero(); }
};

LogElement log_add(const LogElement& a, const LogElement& b);
LogElement log_mul_element(const LogElement& a, const GenLaurentElement& f);
LogElement log_differentiate(const LogElement& a);
// integral from 1 to x; throws LogObstruction if a residue meets the log part
// (a log^2 term would be needed)
LogElement log_integrate_rb(const LogElement& a);
double log_evaluate_double(const LogElement& a, double x0);

} // namespace greenbp
