#pragma once

#include "greenbp/laurent.hpp"

#include <compare>
#include <string>
#include <vector>

namespace greenbp {

// raised when a rewrite has no rule (kept deliberately small; see composition
// table in the implementation)
struct UnsupportedComposition : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exact arithmetic would need an irrational value (e.g. evaluating x^(1/2) at
// a non-square rational point)
struct ExactnessLost : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// kernel extraction met a functional that is not integral-representable
struct DistributionalKernel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A(w) = integral from 1 to x of a Laurent polynomial, exact; LogObstruction
// on a residue term
GenLaurentPoly laurent_poly_integral(const GenLaurentPoly& w);
GenLaurentPoly laurent_poly_derivative(const GenLaurentPoly& w, unsigned times = 1);
// exact evaluation at a rational point; ExactnessLost when a fractional power
// has no rational value there
Rational laurent_poly_eval(const GenLaurentPoly& w, const Rational& xi);

// Linear functionals on the series field.
//   PointEval(xi, j): f -> f^(j)(xi), xi in (0,1]
//   Coeff(k, mu):     f -> coefficient of x^{k+mu}
//   DefInt(lo, hi, w): f -> integral_{lo}^{hi} w(xi) f(xi) dxi, where lo = 0
//                      is read as the termwise finite part (equal to the true
//                      integral whenever w·f is integrable at 0)
struct Functional {
    enum Kind { PointEval, Coeff, DefInt } kind;
    Rational xi;       // PointEval
    unsigned deriv = 0;
    long k = 0;        // Coeff
    Rational mu;
    Rational lo, hi;   // DefInt
    GenLaurentPoly weight;

    static Functional point_eval(const Rational& xi, unsigned j = 0);
    static Functional coefficient(long k, const Rational& mu = Rational(0));
    static Functional def_int(const Rational& lo, const Rational& hi, GenLaurentPoly w);

    bool operator==(const Functional& o) const;
    bool operator<(const Functional& o) const; // canonical term order
    std::string to_string() const;
};

// Sum of three kinds of terms:
//   diff:  coeff(x) · D^j             (j = 0 is plain multiplication)
//   integral: left(x) · A · right(ξ)  with A = integral from 1 to x
//   bdry:  left(x) · φ ∘ (A∘weight | weight)
// Normal form: through_A boundary terms are always eliminated by the rewrite
// rules, weights of PointEval/Coeff functionals are folded away, DefInt
// weights and integral right factors are scaled monic at their lowest
// exponent, and equal-structure terms are merged.
struct IntDiffOperator {
    struct DiffTerm {
        GenLaurentPoly coeff;
        unsigned j = 0;
    };
    struct IntTerm {
        GenLaurentPoly left, right;
    };
    struct BdryTerm {
        GenLaurentPoly left;
        Functional phi;
        bool through_A = false;
        GenLaurentPoly weight = GenLaurentPoly::constant(1);
    };

    std::vector<DiffTerm> diff;
    std::vector<IntTerm> integral;
    std::vector<BdryTerm> bdry;

    static IntDiffOperator zero() { return {}; }
    static IntDiffOperator identity();
    static IntDiffOperator multiplication(const GenLaurentPoly& w);
    static IntDiffOperator derivative(unsigned j = 1);
    static IntDiffOperator integral_from_1(); // A
    static IntDiffOperator rank_one(const GenLaurentPoly& left, const Functional& phi);

    bool is_zero() const { return diff.empty() && integral.empty() && bdry.empty(); }
    friend IntDiffOperator operator+(const IntDiffOperator& a, const IntDiffOperator& b);
    friend IntDiffOperator operator-(const IntDiffOperator& a, const IntDiffOperator& b);
    IntDiffOperator scaled(const Rational& s) const;

    std::string to_string() const; // A, F, e_xi, c_{k+mu} notation
};

// merge/sort/scale into the unique normal form (no rule application; terms
// are assumed rule-reduced, which compose guarantees)
IntDiffOperator normalize(IntDiffOperator op);

// structural equality of normal forms
bool operator==(const IntDiffOperator& a, const IntDiffOperator& b);

// a after b (i.e. f -> a(b(f))), fully rewritten into normal form
IntDiffOperator normalize_compose(const IntDiffOperator& a, const IntDiffOperator& b);

// drop boundary terms that vanish identically on analytic arguments
// (coefficient functionals with negative index or fractional class);
// idempotent
IntDiffOperator restrict_to_analytic(IntDiffOperator op);

// exact application.  Functional values on truncated arguments are partial
// sums over the known window (exact for exact arguments); reading past a
// window raises TruncationExceeded.  With drop_residues, residues met by any
// integral are discarded instead of raising LogObstruction (the log-free
// right-inverse variant; the dropped parts are kernel multiples).
GenLaurentElement apply_to_series(const IntDiffOperator& op, const GenLaurentElement& f,
                                  bool drop_residues = false);

// scalar value of a functional on an element (same window semantics)
Rational apply_functional_to_element(const Functional& phi, const GenLaurentElement& f,
                                     bool drop_residues = false);

// Piecewise-separable kernel g(x, ξ) with (Gf)(x) = ∫₀¹ g(x,ξ) f(ξ) dξ.
struct GreensFunction {
    struct Term {
        GenLaurentPoly p; // in x
        GenLaurentPoly q; // in ξ
    };
    enum Relation { XiBelowX, XiAboveX, Everywhere };
    struct Piece {
        Relation rel;
        Rational lo, hi; // ξ-cell
        std::vector<Term> terms;
    };
    std::vector<Rational> breakpoints; // interior ξ breakpoints
    std::vector<Piece> pieces;

    // kernel value by exact piecewise evaluation (x != ξ, off breakpoints)
    Rational eval(const Rational& x, const Rational& xi) const;
    double eval_double(double x, double xi) const;
};

GreensFunction extract_greens_function(const IntDiffOperator& op);

// canonical JSON of a normal form / kernel (nlohmann dumped by callers)
std::string operator_to_json(const IntDiffOperator& op);
std::string greens_function_to_json(const GreensFunction& g);

} // namespace greenbp
