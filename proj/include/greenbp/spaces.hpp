#pragma once

#include "greenbp/boundary.hpp"

#include <optional>
#include <string>
#include <vector>

namespace greenbp {

// the boundary space fails the rank conditions needed for a well-posed
// reduction (regular block / semi-regular space)
struct NotSemiRegular : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One ramification class mu of the solution subspace carved out by a
// boundary space.  Elements of the class look like
//
//    sum_i v_i p_i(x)  +  sum couplings q(x) * b_nu^(j)(xi)  +  x^{j_tail+mu} b_mu(x)
//
// with free scalars v_i, a free analytic tail b_mu per class, and the
// coupling values read off the (shifted) tails b_nu = x^{-j_tail(nu)-nu} *
// (class-nu tail) of the same element.  Exponents in basis/q polynomials are
// absolute (they carry the x^mu factor); all of them lie in [k_lo+mu,
// j_tail+mu).  Below k_lo+mu the class is pinned to zero.
struct AdmissibleComponent {
    Rational mu;
    long k_lo = 0;   // curbing bound: no exponents below k_lo + mu
    long j_tail = 0; // free tail starts at x^{j_tail + mu}

    std::vector<GenLaurentPoly> basis; // window span, deterministic order
    std::vector<GenLaurentPoly> ortho; // same span, orthogonalized coefficientwise

    struct Coupling {
        Rational nu;        // class whose tail is sampled
        Rational xi;        // sample point
        unsigned deriv = 0; // derivative order of the shifted tail
        GenLaurentPoly q;   // window polynomial the sampled value multiplies
    };
    std::vector<Coupling> couplings;
};

struct AdmissibleSpaceRepr {
    std::vector<AdmissibleComponent> comps; // ascending mu
    const AdmissibleComponent* find(const Rational& mu) const;
};

// Executes the reduction: set up the window/tail ansatz per class, impose
// every functional of the space's finite part, solve for the window
// coefficients, and iteratively clear the leftover constraints on the tails
// (smallest class first, trading each batch of constraints for freshly fixed
// low tail coefficients via a Hermite interpolation solve).  Every class of
// the operator's indicial data must carry a curbing family.  Throws
// NotSemiRegular when the rank preconditions fail, TruncationExceeded when a
// window would grow past trunc, and a plain runtime_error if a free
// parameter ends up coupling two classes (no direct-sum presentation then).
AdmissibleSpaceRepr admissible_space(const FuchsianOperator& op, const BoundarySpace& space,
                                     const FundamentalSystem& fs, long trunc);

// Projector onto the admissible space.  apply_raw projects classwise
// (annihilate below the window, reproduce tails and couplings, orthogonally
// project the coupling-free window part onto the basis); apply additionally
// corrects by a finite-rank Woodbury term so that every fundamental solution
// maps to zero, which apply_raw alone does not grant when the u_i have
// nonvanishing tails.
struct AdmissibleProjector {
    AdmissibleSpaceRepr repr;
    std::vector<BoundaryFunctional> duals;        // beta~_i, beta~_i(u_j) = delta_ij
    std::vector<GenLaurentElement> kernel_images; // g_i = apply_raw(u_i), zeros kept
    Mat woodbury;                                 // (I - B)^{-1}, B_ij = beta~_i(g_j)
    bool corrected = false;                       // any g_i nonzero?

    GenLaurentElement apply_raw(const GenLaurentElement& f) const;
    GenLaurentElement apply(const GenLaurentElement& f) const;
};

// block = the regular block of functionals (their evaluation matrix against
// the fundamental system must be invertible)
AdmissibleProjector admissible_projector(const AdmissibleSpaceRepr& repr,
                                         const FundamentalSystem& fs,
                                         const std::vector<BoundaryFunctional>& block);

// Projector onto the accessible space T(admissible): f -> T(P(T_sharp f))
// where T_sharp is the residue-dropping variation-of-constants right inverse
// (the dropped log parts are kernel multiples, which P annihilates).  When
// the operator and fundamental system are exact the same map is assembled
// once as a closed normal form valid on analytic inputs.
struct AccessibleProjector {
    FuchsianOperator op;
    AdmissibleProjector P;
    FundamentalSystem fs;
    std::vector<GenLaurentElement> tails;
    std::optional<IntDiffOperator> analytic_form;

    GenLaurentElement apply(const GenLaurentElement& f) const;
};

AccessibleProjector accessible_projector(const FuchsianOperator& op, AdmissibleProjector P,
                                         const FundamentalSystem& fs, long trunc);

// Cofinite description of what 1 - Q leaves over: monomial families the
// projector annihilates entirely (x^{k+mu} for all probed k <= k_max) plus
// individual non-monomial leftovers.
struct ExceptionalFamily {
    Rational mu;
    long k_max = 0;
    long verified_down_to = 0; // probing floor (family is asserted cofinitely, checked here)
};

struct ExceptionalDescription {
    std::vector<GenLaurentElement> generators; // nonzero (1-Q) x^{k+mu} that are not the probe itself
    std::vector<ExceptionalFamily> families;
};

ExceptionalDescription exceptional_space(const AccessibleProjector& Q, long trunc);

// Green's operator of the regularized problem in closed form:
//   G = (1 - kernel projector) . T_diamond . Q|analytic
// Needs exact fundamental data (ExactnessLost otherwise).  Satisfies
// T G = Q and beta(G f) = 0 for the regular block on analytic forcings.
IntDiffOperator greens_operator(const FuchsianOperator& op, const BoundarySpace& space,
                                const FundamentalSystem& fs, long trunc);

std::string admissible_space_to_json(const AdmissibleSpaceRepr& repr);
std::string exceptional_to_json(const ExceptionalDescription& e);

} // namespace greenbp
