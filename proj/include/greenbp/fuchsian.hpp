#pragma once

#include "greenbp/opring.hpp"

namespace greenbp {

struct NotFuchsian : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IrrationalIndicialRoots : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// a pure power-series solution does not exist at the requested root; the
// message carries the witness pair of roots
struct ResonantObstruction : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WronskianDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sum a_j(x) D^j with a regular singular point allowed at 0 and nothing else
// on (0,1].  Validated on construction (make_fuchsian):
//   * a_n not identically zero and nonvanishing on (0,1],
//   * every a_j finite on (0,1],
//   * x^{n-j} a_j / a_n regular at 0 (the regular-singularity condition).
struct FuchsianOperator {
    unsigned n = 0;
    std::vector<RationalFunction> a; // a[j] multiplies D^j, size n+1
    std::vector<RationalFunction> p; // normalized a[j]/a[n]

    // expansion at 0 of c_j = x^{n-j} a_j / a_n, window through exponent upto
    GenLaurentElement coefficient_expansion(unsigned j, long upto) const;
    // every c_j a genuine Laurent polynomial (expansions tail-free)?
    bool exact_coefficients() const;
    // max degree among the c_j expansions; the zero-run length that certifies
    // termination of the recursion with exact coefficients
    long certificate_degree() const;
};

FuchsianOperator make_fuchsian(std::vector<RationalFunction> coeffs);

struct IndicialData {
    Poly indicial;                    // monic, in the exponent variable
    std::vector<Rational> roots;      // ascending, multiplicities repeated
    std::vector<Rational> mu_classes; // distinct fractional parts of the roots
};

// substituting x^s: indicial polynomial sum_j c_j(0) s(s-1)...(s-j+1);
// IrrationalIndicialRoots when it does not split over Q
IndicialData indicial_data(const FuchsianOperator& op);

// x^lambda (1 + sum_{k>=1} a_k x^k): the recursion in the k-th coefficient,
// with the canonical choice a_K = 0 at a resonant index whose right-hand side
// vanishes; ResonantObstruction (with witness) otherwise or at a repeated
// root.  When the c_j are exact a long enough run of zero coefficients
// certifies the expansion terminates and the result is marked exact.
GenLaurentElement frobenius_solution(const FuchsianOperator& op, const Rational& lambda,
                                     long trunc);

struct FundamentalSystem {
    std::vector<GenLaurentElement> u; // unit leading coefficient, roots ascending
    std::vector<Rational> roots;
    GenLaurentElement W; // Wronskian det [D^r u_i]
};

FundamentalSystem fundamental_system(const FuchsianOperator& op, long trunc);

// sum_j a_j d^j u (raw) or sum_j p_j d^j u (normalized)
GenLaurentElement apply_operator(const FuchsianOperator& op, const GenLaurentElement& u,
                                 bool normalized = false);

// determinant of a square matrix of series elements (Laplace expansion)
GenLaurentElement element_det(const std::vector<std::vector<GenLaurentElement>>& m);

// variation-of-constants integrand tails t_i = cofactor_i / (W a_n), window
// through exponent upto; T (sum u_i A t_i f) = f wherever no log obstruction
std::vector<GenLaurentElement> variation_tails(const FuchsianOperator& op,
                                               const FundamentalSystem& fs, const Rational& upto);

// the finitary operator sum_i u_i A t_i; needs exact fundamental data
// (ExactnessLost otherwise).  Satisfies T ∘ result = id away from log
// obstructions and e_1.D^j ∘ result = 0 for j < n.
IntDiffOperator fundamental_right_inverse(const FuchsianOperator& op,
                                          const FundamentalSystem& fs);

// the same operator/right-inverse applications carried through a log x layer:
// residues met by A become log terms instead of obstructions, and applying
// the operator to the result lands back in the field
LogElement apply_operator_log(const FuchsianOperator& op, const LogElement& u,
                              bool normalized = false);
LogElement apply_right_inverse_log(const FundamentalSystem& fs,
                                   const std::vector<GenLaurentElement>& tails,
                                   const GenLaurentElement& f);

// exact conversion to a Laurent polynomial; ExactnessLost when the reduced
// denominator is not a monomial
GenLaurentPoly rational_function_to_laurent(const RationalFunction& rf);

// the operator itself as a finitary diff-term sum (exact coefficients only)
IntDiffOperator operator_as_intdiff(const FuchsianOperator& op, bool normalized = false);

} // namespace greenbp
