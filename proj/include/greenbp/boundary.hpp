#pragma once

#include "greenbp/fuchsian.hpp"
#include "greenbp/linalg.hpp"
#include "greenbp/opring.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace greenbp {

struct SingularEvaluationMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Finite combination of point evaluations e_xi D^l (0 < xi <= 1) and
// coefficient functionals c_{k+mu}.  This is the admitted class of boundary
// conditions; integral (Stieltjes) terms are out of scope.
struct BoundaryFunctional {
    struct Term {
        Rational coeff;
        Functional base; // PointEval or Coeff only
    };
    std::vector<Term> terms;

    static BoundaryFunctional point_eval(const Rational& xi, unsigned deriv = 0);
    static BoundaryFunctional coefficient(long k, const Rational& mu = Rational(0));

    BoundaryFunctional scaled(const Rational& s) const;
    friend BoundaryFunctional operator+(const BoundaryFunctional& a, const BoundaryFunctional& b);
    friend BoundaryFunctional operator-(const BoundaryFunctional& a, const BoundaryFunctional& b);

    void normalize(); // merge equal bases, drop zero terms, canonical order
    bool is_zero() const { return terms.empty(); }
    bool operator==(const BoundaryFunctional& o) const;
    std::string to_string() const;
};

// sum of coeff * base(u); exact in exact mode, window partial sums on
// truncated arguments (TruncationExceeded where a coefficient read overruns)
Rational apply_functional(const BoundaryFunctional& beta, const GenLaurentElement& u);

// entries (i,j) = betas[i](us[j])
Mat evaluation_matrix(const std::vector<BoundaryFunctional>& betas,
                      const std::vector<GenLaurentElement>& us);

// the family {c_{k+mu} : k < k_mu}
struct CurbingFamily {
    Rational mu;
    long k_mu = 0;
};

// Finitely presented boundary space: an explicit functional list (the regular
// block of size regular_count first, any annexed extras after it) plus
// curbing families pinning the admissible pole order per ramification class.
struct BoundarySpace {
    std::vector<BoundaryFunctional> finite_part;
    size_t regular_count = 0;
    std::vector<char> pinned; // aligned with finite_part: slots a trade must not evict
    std::vector<CurbingFamily> curbing;

    std::optional<long> curb_bound(const Rational& mu) const;
    // beta a combination of c_{k+mu} with k below the family bounds?
    bool in_curbing_span(const BoundaryFunctional& beta) const;
};

// Canonical coefficient functionals of a fundamental system: after monic
// scaling and tie-breaking (u_{i+1} <- monic(u_{i+1} - u_i) while orders
// collide), betas[i] = c_{k_i+mu_i} with k_1+mu_1 < ... < k_n+mu_n and the
// evaluation matrix lower unitriangular with unit diagonal.
struct CanonicalSystem {
    std::vector<BoundaryFunctional> betas;
    FundamentalSystem fs; // adjusted system (Wronskian rescaled accordingly)
    Mat E;
};

CanonicalSystem canonical_functionals(const FundamentalSystem& fs);

// finite part = betas as the regular block; curbing bounds k_mu must be the
// minimal order per class among the system the betas came from
BoundarySpace build_boundary_space(std::vector<BoundaryFunctional> betas,
                                   std::vector<CurbingFamily> curbing);
BoundarySpace build_boundary_space(const CanonicalSystem& cs);

enum class ImposeKind { Traded, Annexed, RedundantCurbing };

struct ImposeOutcome {
    ImposeKind kind = ImposeKind::RedundantCurbing;
    size_t index = 0;               // replaced slot for Traded
    bool accessible_shrunk = false; // warning: annexed conditions cut the accessible space
};

// Impose beta on the space.  Nonzero kernel row: trade beta into the regular
// block at the largest eligible (unpinned) slot of its row expansion, pinning
// it there.  Zero kernel row: redundant curbing constraint when beta lies in
// the curbing span, otherwise annexed behind the regular block with a
// shrink warning.
std::pair<BoundarySpace, ImposeOutcome> trade_or_annex(const BoundarySpace& space,
                                                       const BoundaryFunctional& beta,
                                                       const FundamentalSystem& fs);

// full rank n of the evaluation matrix against the kernel basis
bool regularity_check(const std::vector<BoundaryFunctional>& betas, const FundamentalSystem& fs);
// finite part plus the curbing window rows still have full column rank n
bool semi_regularity_check(const BoundarySpace& space, const FundamentalSystem& fs);

// rows of E^{-1} (beta_1 .. beta_n)^T: beta~_i(u_j) = delta_ij
std::vector<BoundaryFunctional> dual_functionals(const FundamentalSystem& fs,
                                                 const std::vector<BoundaryFunctional>& betas);

// P = sum_i u_i . beta~_i; fixes the kernel basis, Img(P) = Ker(T), and 1-P
// is annihilated by every beta_i.  The u_i must be exact (finite) elements;
// SingularEvaluationMatrix when the evaluation matrix degenerates.
IntDiffOperator kernel_projector(const FundamentalSystem& fs,
                                 const std::vector<BoundaryFunctional>& betas);

std::string boundary_functional_to_json(const BoundaryFunctional& beta);
std::string boundary_space_to_json(const BoundarySpace& space);

} // namespace greenbp
