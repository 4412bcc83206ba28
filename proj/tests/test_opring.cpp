#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "greenbp/expr.hpp"
#include "greenbp/fuchsian.hpp"
#include "greenbp/opring.hpp"

#include <random>

using namespace greenbp;

static Rational Q(const char* s) { return parse_rational(s); }

static std::mt19937 rng(440317);

static GenLaurentPoly rand_glp(int lo = 0, int hi = 5) {
    std::uniform_int_distribution<int> nterms(1, 4);
    std::uniform_int_distribution<int> edist(lo, hi);
    std::uniform_int_distribution<int> num(-5, 5);
    std::uniform_int_distribution<int> den(1, 3);
    GenLaurentPoly p;
    int n = nterms(rng);
    for (int i = 0; i < n; ++i) {
        Rational c(num(rng), den(rng));
        if (c != 0) p += GenLaurentPoly::monomial(c, edist(rng));
    }
    if (p.is_zero()) p = GenLaurentPoly::constant(1);
    return p;
}

static GenLaurentPoly M(const char* c, const char* e) {
    return GenLaurentPoly::monomial(Q(c), Q(e));
}

// integral of p over [a, b], exactly (integer exponents, no residue term)
static Rational segment_integral(const GenLaurentPoly& p, const Rational& a, const Rational& b) {
    Rational s = 0;
    for (const auto& [e, c] : p.t) {
        REQUIRE(rat_is_integer(e));
        REQUIRE(e != -1);
        long ee = rat_to_long(e) + 1;
        s += c * (rat_pow(b, ee) - rat_pow(a, ee)) / (e + 1);
    }
    return s;
}

TEST_CASE("laurent polynomial calculus") {
    // A(1) = x - 1
    GenLaurentPoly one = GenLaurentPoly::constant(1);
    CHECK(laurent_poly_integral(one) == M("1", "1") + M("-1", "0"));
    // A(x^2) = x^3/3 - 1/3
    CHECK(laurent_poly_integral(M("1", "2")) == M("1/3", "3") + M("-1/3", "0"));
    // A(x^-2) = -1/x + 1
    CHECK(laurent_poly_integral(M("1", "-2")) == M("-1", "-1") + M("1", "0"));
    // residues obstruct
    CHECK_THROWS_AS(laurent_poly_integral(M("1", "-1")), LogObstruction);

    CHECK(laurent_poly_derivative(M("1", "1/2")) == M("1/2", "-1/2"));
    CHECK(laurent_poly_eval(M("1", "1/2") + M("2", "0"), Q("1/4")) == Q("5/2"));
    CHECK_THROWS_AS(laurent_poly_eval(M("1", "1/2"), Q("1/3")), ExactnessLost);
}

TEST_CASE("elementary compositions") {
    IntDiffOperator A = IntDiffOperator::integral_from_1();
    IntDiffOperator D = IntDiffOperator::derivative();
    IntDiffOperator I = IntDiffOperator::identity();

    // D ∘ A = 1
    CHECK(normalize_compose(D, A) == normalize(I));

    // A ∘ D = 1 - e_1
    IntDiffOperator AD = normalize_compose(A, D);
    REQUIRE(AD.diff.size() == 1);
    CHECK(AD.diff[0].coeff == GenLaurentPoly::constant(1));
    REQUIRE(AD.bdry.size() == 1);
    CHECK(AD.bdry[0].phi == Functional::point_eval(1, 0));
    CHECK(AD.bdry[0].left == GenLaurentPoly::constant(-1));

    // D ∘ (mult x^2) = 2x + x^2 D
    IntDiffOperator Dx2 = normalize_compose(D, IntDiffOperator::multiplication(M("1", "2")));
    REQUIRE(Dx2.diff.size() == 2);
    CHECK(Dx2.diff[0].j == 0);
    CHECK(Dx2.diff[0].coeff == M("2", "1"));
    CHECK(Dx2.diff[1].j == 1);
    CHECK(Dx2.diff[1].coeff == M("1", "2"));

    // second derivative through a product, against a direct application
    IntDiffOperator D2f =
        normalize_compose(IntDiffOperator::derivative(2),
                          IntDiffOperator::multiplication(M("1", "3") + M("2", "1")));
    GenLaurentElement arg = GenLaurentElement::monomial(1, 2);
    GenLaurentElement via_op = apply_to_series(D2f, arg);
    // d^2/dx^2 [(x^3 + 2x) * x^2] = 20x^3 + 12x
    GenLaurentElement direct = GenLaurentElement::from_laurent_poly(M("20", "3") + M("12", "1"));
    CHECK(element_equal(via_op, direct));
}

TEST_CASE("coefficient functionals compose through the integral") {
    // c_0 ∘ A ∘ x^2 = -F[xi^2]
    IntDiffOperator c0 = IntDiffOperator::rank_one(GenLaurentPoly::constant(1),
                                                   Functional::coefficient(0, 0));
    IntDiffOperator Ax2 = normalize_compose(IntDiffOperator::integral_from_1(),
                                            IntDiffOperator::multiplication(M("1", "2")));
    IntDiffOperator r = normalize_compose(c0, Ax2);
    REQUIRE(r.bdry.size() == 1);
    CHECK(r.bdry[0].phi == Functional::def_int(0, 1, M("1", "2")));
    CHECK(r.bdry[0].left == GenLaurentPoly::constant(-1));

    // application agrees: c_0(A(xi^2 f)) with f = 1 + x is -(1/3 + 1/4)
    GenLaurentElement f = GenLaurentElement::from_laurent_poly(M("1", "0") + M("1", "1"));
    GenLaurentElement composed = apply_to_series(Ax2, f);
    CHECK(coeff_extract(composed, 0, 0) == Q("-7/12"));
    CHECK(apply_functional_to_element(r.bdry[0].phi, f) * Q("-1") == Q("-7/12"));

    // c_k ∘ A for k != 0 shifts and scales
    IntDiffOperator c2 = IntDiffOperator::rank_one(GenLaurentPoly::constant(1),
                                                   Functional::coefficient(2, 0));
    IntDiffOperator r2 = normalize_compose(c2, IntDiffOperator::integral_from_1());
    REQUIRE(r2.bdry.size() == 1);
    CHECK(r2.bdry[0].phi == Functional::coefficient(1, 0));
    CHECK(r2.bdry[0].left == GenLaurentPoly::constant(Q("1/2")));
}

TEST_CASE("point evaluations compose through the integral") {
    // e_{1/2} ∘ A ∘ g = -Int[1/2,1][g]
    IntDiffOperator e = IntDiffOperator::rank_one(GenLaurentPoly::constant(1),
                                                  Functional::point_eval(Q("1/2"), 0));
    IntDiffOperator Ag = normalize_compose(IntDiffOperator::integral_from_1(),
                                           IntDiffOperator::multiplication(M("3", "1")));
    IntDiffOperator r = normalize_compose(e, Ag);
    REQUIRE(r.bdry.size() == 1);
    CHECK(r.bdry[0].phi == Functional::def_int(Q("1/2"), 1, M("1", "1")));
    CHECK(r.bdry[0].left == GenLaurentPoly::constant(-3));

    // e_1 ∘ A ∘ g = 0
    IntDiffOperator e1 = IntDiffOperator::rank_one(GenLaurentPoly::constant(1),
                                                   Functional::point_eval(1, 0));
    CHECK(normalize_compose(e1, Ag).is_zero());

    // e_{1/2}.D ∘ A ∘ g = e_{1/2} ∘ (mult g) = g(1/2)·e_{1/2}
    IntDiffOperator ed = IntDiffOperator::rank_one(GenLaurentPoly::constant(1),
                                                   Functional::point_eval(Q("1/2"), 1));
    IntDiffOperator rd = normalize_compose(ed, Ag);
    REQUIRE(rd.bdry.size() == 1);
    CHECK(rd.bdry[0].phi == Functional::point_eval(Q("1/2"), 0));
    CHECK(rd.bdry[0].left == GenLaurentPoly::constant(Q("3/2")));
}

TEST_CASE("rank-one collapse of stacked functionals") {
    // (x·e_1) ∘ (x^2·c_0) = x·(1)^... : e_1 applied to x^2 scaled by c_0(f)
    IntDiffOperator a = IntDiffOperator::rank_one(M("1", "1"), Functional::point_eval(1, 0));
    IntDiffOperator b = IntDiffOperator::rank_one(M("1", "2"), Functional::coefficient(0, 0));
    IntDiffOperator r = normalize_compose(a, b);
    REQUIRE(r.bdry.size() == 1);
    CHECK(r.bdry[0].phi == Functional::coefficient(0, 0));
    CHECK(r.bdry[0].left == M("1", "1")); // e_1(x^2) = 1

    // idempotent projector shape: P = u·phi with phi(u) = 1 gives P∘P = P
    GenLaurentPoly u = M("2", "1"); // phi = e_{1/2}, u = 2x, phi(u) = 1
    IntDiffOperator P = IntDiffOperator::rank_one(u, Functional::point_eval(Q("1/2"), 0));
    CHECK(normalize_compose(P, P) == normalize(P));
}

TEST_CASE("Rota-Baxter identity, function level and operator level") {
    for (int trial = 0; trial < 50; ++trial) {
        GenLaurentPoly f = rand_glp(), g = rand_glp();
        GenLaurentPoly Af = laurent_poly_integral(f), Ag = laurent_poly_integral(g);
        CHECK(Af * Ag ==
              laurent_poly_integral(f * Ag) + laurent_poly_integral(g * Af));
    }

    IntDiffOperator A = IntDiffOperator::integral_from_1();
    for (int trial = 0; trial < 50; ++trial) {
        GenLaurentPoly f = rand_glp(), g = rand_glp();
        IntDiffOperator Afop = normalize_compose(A, IntDiffOperator::multiplication(f));
        IntDiffOperator Agop = normalize_compose(A, IntDiffOperator::multiplication(g));
        // both association orders of A∘f∘A∘g give one normal form
        IntDiffOperator left = normalize_compose(Afop, Agop);
        IntDiffOperator right = normalize_compose(
            A, normalize_compose(IntDiffOperator::multiplication(f), Agop));
        CHECK(left == right);
        // and normalization is idempotent on it
        CHECK(normalize(left) == left);
    }
}

TEST_CASE("normalization merges and scales canonically") {
    // x·A·(2xi) + x·A·(xi) = 3x·A·xi  (monic right factors)
    IntDiffOperator op;
    op.integral.push_back({M("1", "1"), M("2", "1")});
    op.integral.push_back({M("1", "1"), M("1", "1")});
    IntDiffOperator n = normalize(op);
    REQUIRE(n.integral.size() == 1);
    CHECK(n.integral[0].left == M("3", "1"));
    CHECK(n.integral[0].right == M("1", "1"));

    // boundary weights fold into the functional
    IntDiffOperator b;
    b.bdry.push_back({GenLaurentPoly::constant(1), Functional::point_eval(Q("1/2"), 1), false,
                      M("1", "2")});
    IntDiffOperator nb = normalize(b);
    // e_{1/2}.D ∘ x^2 = 2·(1/2)·e_{1/2} + (1/4)·e_{1/2}.D
    REQUIRE(nb.bdry.size() == 2);
    CHECK(nb.bdry[0].phi == Functional::point_eval(Q("1/2"), 0));
    CHECK(nb.bdry[0].left == GenLaurentPoly::constant(1));
    CHECK(nb.bdry[1].phi == Functional::point_eval(Q("1/2"), 1));
    CHECK(nb.bdry[1].left == GenLaurentPoly::constant(Q("1/4")));
}

TEST_CASE("restriction to analytic arguments") {
    IntDiffOperator op;
    op.bdry.push_back({M("1", "1"), Functional::coefficient(-3, 0), false,
                       GenLaurentPoly::constant(1)});
    op.bdry.push_back({M("1", "0"), Functional::coefficient(0, 0), false,
                       GenLaurentPoly::constant(1)});
    op.bdry.push_back({M("1", "0"), Functional::coefficient(2, Q("1/2")), false,
                       GenLaurentPoly::constant(1)});
    op.bdry.push_back({M("1", "2"), Functional::point_eval(1, 0), false,
                       GenLaurentPoly::constant(1)});
    IntDiffOperator r = restrict_to_analytic(op);
    REQUIRE(r.bdry.size() == 2); // c_{-3} and the fractional class are gone
    CHECK(r.bdry[0].phi == Functional::point_eval(1, 0));
    CHECK(r.bdry[1].phi == Functional::coefficient(0, 0));
    CHECK(restrict_to_analytic(r) == r);
}

TEST_CASE("unsupported composites fail loudly") {
    IntDiffOperator F = IntDiffOperator::rank_one(
        GenLaurentPoly::constant(1), Functional::def_int(0, 1, GenLaurentPoly::constant(1)));
    CHECK_THROWS_AS(normalize_compose(F, IntDiffOperator::integral_from_1()),
                    UnsupportedComposition);
}

TEST_CASE("kernel extraction on the model right inverse") {
    FuchsianOperator op = make_fuchsian({expr_to_rational_function(parse_expression("-1/x^2")),
                                         expr_to_rational_function(parse_expression("1/x")),
                                         expr_to_rational_function(parse_expression("1"))});
    FundamentalSystem fs = fundamental_system(op, 40);
    IntDiffOperator Tdia = fundamental_right_inverse(op, fs);

    // add the correction that the full solver derives: (x - 1/x)·F[xi^2/2]
    IntDiffOperator G = Tdia;
    G.bdry.push_back({M("1", "1") + M("-1", "-1"), Functional::def_int(0, 1, M("1/2", "2")),
                      false, GenLaurentPoly::constant(1)});
    G = normalize(G);

    GreensFunction k = extract_greens_function(G);
    CHECK(k.breakpoints.empty());
    // below the diagonal: x xi^2/2 - xi^2/(2x); above: x xi^2/2 - x/2
    CHECK(k.eval(Q("1/2"), Q("1/4")) == Q("-3/64"));
    CHECK(k.eval(Q("1/4"), Q("1/2")) == Q("-3/32"));

    // the kernel integral reproduces the operator pointwise: split the range
    // at x and integrate each separable piece
    for (int trial = 0; trial < 10; ++trial) {
        GenLaurentPoly f = rand_glp(0, 4);
        GenLaurentElement gf =
            apply_to_series(G, GenLaurentElement::from_laurent_poly(f));
        for (const Rational& x : {Q("1/4"), Q("1/2"), Q("3/4")}) {
            Rational via_kernel = 0;
            // xi <= x piece then xi >= x piece
            for (const auto& piece : k.pieces) {
                Rational lo = piece.lo, hi = piece.hi;
                if (piece.rel == GreensFunction::XiBelowX) hi = std::min(hi, x);
                if (piece.rel == GreensFunction::XiAboveX) lo = std::max(lo, x);
                if (lo >= hi) continue;
                for (const auto& t : piece.terms)
                    via_kernel += laurent_poly_eval(t.p, x) * segment_integral(t.q * f, lo, hi);
            }
            CHECK(apply_functional_to_element(Functional::point_eval(x, 0), gf) == via_kernel);
        }
    }

    // distributional shapes are rejected
    CHECK_THROWS_AS(extract_greens_function(IntDiffOperator::identity()), DistributionalKernel);
    CHECK_THROWS_AS(extract_greens_function(IntDiffOperator::rank_one(
                        M("1", "1"), Functional::point_eval(1, 0))),
                    DistributionalKernel);
}

TEST_CASE("breakpoints from half-range integrals") {
    IntDiffOperator op;
    op.bdry.push_back({M("1", "1"), Functional::def_int(Q("1/3"), 1, GenLaurentPoly::constant(1)),
                       false, GenLaurentPoly::constant(1)});
    GreensFunction k = extract_greens_function(op);
    REQUIRE(k.breakpoints.size() == 1);
    CHECK(k.breakpoints[0] == Q("1/3"));
    // zero left of the cut, x right of it
    CHECK(k.eval(Q("1/2"), Q("1/4")) == 0);
    CHECK(k.eval(Q("1/2"), Q("2/3")) == Q("1/2"));
    CHECK(k.eval(Q("9/10"), Q("1/2")) == Q("9/10"));
}

TEST_CASE("printing and serialization stay stable") {
    IntDiffOperator op;
    op.integral.push_back({M("1/2", "1"), GenLaurentPoly::constant(1)});
    op.bdry.push_back({M("-1/2", "-1"), Functional::coefficient(-1, 0), false,
                       GenLaurentPoly::constant(1)});
    op = normalize(op);
    std::string s = op.to_string();
    CHECK(s.find("A") != std::string::npos);
    CHECK(s.find("c_{-1}") != std::string::npos);

    std::string j = operator_to_json(op);
    CHECK(j.find("\"integral\"") != std::string::npos);
    CHECK(j.find("\"coeff\"") != std::string::npos);
}
