#pragma once

#include "greenbp/boundary.hpp"
#include "greenbp/expr.hpp"
#include "greenbp/quadrature.hpp"
#include "greenbp/spaces.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace greenbp {

struct VerificationFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One entry of the "conditions" array: either an explicit combination of
// point evaluations / coefficient functionals, or the keyword
// "regularized_zero_at_origin", expanded against the indicial data once the
// operator is known (coefficient family c_{k+mu}, curb bound <= k, k+mu <= 0,
// ascending).
struct ConditionSpec {
    bool regularized_origin = false;
    BoundaryFunctional fn; // ignored for the keyword form

    bool operator==(const ConditionSpec& o) const {
        return regularized_origin == o.regularized_origin && fn == o.fn;
    }
};

// A two-point problem on [0, b] with the singular end at 0.  Everything is
// exact; coefficients are rational functions of the problem variable.
struct ProblemSpec {
    std::vector<std::string> coeff_text;  // a_0 .. a_n as written
    std::vector<RationalFunction> coeffs; // parsed; coeffs[j] multiplies D^j
    Rational b = 1;                       // regular endpoint
    std::vector<ConditionSpec> conditions;
    long truncation = 40;

    // structural equality of the mathematical content (source text is
    // regenerated by transformations and deliberately not compared)
    bool operator==(const ProblemSpec& o) const {
        return coeffs == o.coeffs && b == o.b && conditions == o.conditions &&
               truncation == o.truncation;
    }
};

// Exact JSON ingestion.  ParseError carries the offending field; all numbers
// travel as strings ("3", "-1/2"); bare float literals are rejected with a
// hint to write the exact fraction.
ProblemSpec parse_problem(const std::string& path);
ProblemSpec parse_problem_text(const std::string& text);
std::string problem_to_json(const ProblemSpec& spec);

// Substitute x -> s*x: a problem on [0, b] becomes one on [0, b/s] (s = b
// normalizes to [0,1]).  Coefficients pick up s^{-j} per derivative order,
// condition points move to xi/s, and scale_domain(scale_domain(p, s), 1/s)
// is structurally the identity.
ProblemSpec scale_domain(const ProblemSpec& spec, const Rational& s);

struct ImpositionStep {
    std::string condition;
    ImposeKind kind = ImposeKind::Annexed;
    size_t slot = 0;
    bool accessible_shrunk = false;
};

// Second-order evaluator for problems whose fundamental data is truncated
// (no exact closed form): the regular subproblem with the boundary block
// {c_{k_min + mu}, e_1} and kernel pieces
//   xi <= x:  v(x) t_1(xi)
//   xi >= x:  v(x) t_1(xi) - u_1(x) t_1(xi) - u_2(x) t_2(xi)
// where v = u_1 - (u_1(1)/u_2(1)) u_2.  Solutions are assembled per point by
// quadrature: u(x) = v(x) C_1 + u_1(x) A_1(x) + u_2(x) A_2(x) with
// C_1 = int_0^1 t_1 f and A_i(x) = int_1^x t_i f.
struct SeriesGreen {
    // one series element kept exact, plus a flattened double-coefficient copy
    // so the quadrature loops do not convert big rationals per node
    struct Fast {
        GenLaurentElement exact;
        struct Run {
            double start = 0; // x^{start + i} against a[i]
            std::vector<double> a;
        };
        std::vector<Run> runs;

        static Fast make(GenLaurentElement e);
        double at(double x) const;
    };

    FuchsianOperator op;
    Fast u1, u2, t1, t2, v;
    Fast du1, du2, dv, ddu1, ddu2, ddv; // stored derivatives
    Fast s, ds, s2; // s = u1 t1 + u2 t2 (near-zero), s2 = u1' t1 + u2' t2

    double value(double x, const std::function<double(double)>& f, double rel_tol = 1e-10) const;
    // (u, u', u'') at x, honest quadrature (shared integrals)
    void value3(double x, const std::function<double(double)>& f,
                const std::function<double(double)>& df, double out[3],
                double rel_tol = 1e-10) const;
    // a_2 u'' + a_1 u' + a_0 u - f at x
    double residual(double x, const std::function<double(double)>& f,
                    const std::function<double(double)>& df, double rel_tol = 1e-10) const;
    // -int_{rho0}^{x} u ds (the displacement antiderivative)
    double antiderivative(double x, double rho0, const std::function<double(double)>& f,
                          double rel_tol = 1e-8) const;
};

// Everything the commands need, assembled once from a spec.  The problem is
// scaled to [0,1] internally; `scaled` is what the engine actually ran on.
struct SolveResult {
    ProblemSpec scaled;
    FuchsianOperator op;
    CanonicalSystem cs; // tie-broken fundamental system, canonical betas, E
    BoundarySpace space;
    std::vector<ImpositionStep> steps;
    AccessibleProjector Q;
    std::optional<ExceptionalDescription> exceptional; // probed on exact data only
    std::optional<IntDiffOperator> G;                  // closed form (exact data only)
    std::optional<GreensFunction> kernel;
    std::optional<SeriesGreen> series; // order-2 fallback when G is unavailable

    bool exact() const { return G.has_value(); }
};

SolveResult solve_problem(const ProblemSpec& spec);
std::string solve_result_to_json(const SolveResult& r);

// Named forcing shipped with the tool; eval/verify accept the name anywhere
// an expression is expected.  Expressions are in the problem's own variable
// on [0, b]; reference points are (x, u(x)) pairs used by cmd_verify.
struct ForcingFixture {
    std::string name;
    std::string expr;
    std::vector<std::pair<double, double>> reference;
};
const std::vector<ForcingFixture>& forcing_fixtures();
std::string resolve_forcing(const std::string& text); // fixture name -> expr, else text

struct EvalOptions {
    long grid = 11;
    bool quadrature = false; // default exact (symbolic piecewise integration)
    double rel_tol = 1e-10;
};

// CSV "x,u" over x_i = b*i/(grid+1), decimals with 15 significant digits.
// Exact mode integrates the kernel pieces symbolically (Laurent forcing
// required); quadrature mode evaluates the kernel numerically with panels
// split at the diagonal and kernel breakpoints.
std::string cmd_eval(const ProblemSpec& spec, const std::string& forcing, const EvalOptions& opt);

// Exact problems: asserts T(Gf) = Qf and beta(Gf) = 0 for every imposed
// functional, exactly; truncated problems (order 2): residual of the series
// Green evaluator below 1e-6 on a 21-point grid plus fixture reference
// values to 1e-6 relative.  Returns a JSON report; throws VerificationFailed
// with the first violated identity.
std::string cmd_verify(const ProblemSpec& spec, const std::string& forcing);

std::string cmd_solve(const ProblemSpec& spec); // solve_result_to_json(solve_problem(spec))

// Circular plate with linearly tapered thickness t(x) = t0 (1 - x), bending
// rigidity D(x) = E0 t(x)^3 / (12 (1 - nu^2)), clamped slope conditions
// phi(0) = phi(beta) = 0.  The slope equation multiplied by x (the natural
// polynomial-coefficient form) is
//   x phi'' + (1 - 3x/(1-x)) phi' - (1/x + 3 nu/(1-x)) phi = x f(x).
struct KirchhoffConfig {
    Rational nu = Rational(1) / 3;
    Rational t0 = 1, E0 = 1, b = 1;
    Rational beta = Rational(9) / 10;
    bool constant_load = true;
    Rational q0 = 1;
    std::string load_expr; // used when !constant_load
    long truncation = 240;
    Rational rho0 = 0; // displacement reference point
};

// Slope-form forcing from the load: f(x) = Q_r(x) b^2 / D(x) with
// Q_r(x) = -(b/x) int_0^x q(s) s ds (physical cumulative load).
// LogObstruction when the integral leaves the rational-function field.
RationalFunction load_to_forcing(const KirchhoffConfig& cfg);

// The problem on [0, beta] (unscaled; solve_problem normalizes) paired with
// the x-multiplied right-hand side x*f(x) matching the operator form above.
std::pair<ProblemSpec, RationalFunction> kirchhoff_preset(const KirchhoffConfig& cfg);

} // namespace greenbp
