#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "greenbp/boundary.hpp"
#include "greenbp/expr.hpp"

#include <random>

using namespace greenbp;

static Rational Q(const char* s) { return parse_rational(s); }

static RationalFunction RF(const std::string& s) {
    return expr_to_rational_function(parse_expression(s));
}

static FuchsianOperator make_op(const std::vector<std::string>& coeffs) {
    std::vector<RationalFunction> a;
    for (const auto& s : coeffs) a.push_back(RF(s));
    return make_fuchsian(std::move(a));
}

static GenLaurentPoly M(const char* c, const char* e) {
    return GenLaurentPoly::monomial(Q(c), Q(e));
}

static const std::vector<std::string> MODEL = {"-1/x^2", "1/x", "1"};
static const std::vector<std::string> IVP = {"2/x^2", "4/x", "1"};

static std::mt19937 rng(664910);

static GenLaurentElement rand_elem(int lo = -4, int hi = 4) {
    std::uniform_int_distribution<int> expo(lo, hi);
    std::uniform_int_distribution<int> num(-6, 6);
    std::uniform_int_distribution<int> den(1, 4);
    GenLaurentPoly p;
    for (int t = 0; t < 5; ++t) {
        Rational c(num(rng), den(rng));
        if (c != 0) p += GenLaurentPoly::monomial(c, expo(rng));
    }
    if (p.is_zero()) p = GenLaurentPoly::constant(1);
    return GenLaurentElement::from_laurent_poly(p);
}

TEST_CASE("functional application basics") {
    auto R = BoundaryFunctional::point_eval(1);
    auto x_minus_1 = GenLaurentElement::from_laurent_poly(M("1", "1") + M("-1", "0"));
    CHECK(apply_functional(R, x_minus_1) == 0);

    auto cm1 = BoundaryFunctional::coefficient(-1);
    CHECK(apply_functional(cm1, GenLaurentElement::monomial(1, -1)) == 1);

    auto e1d = BoundaryFunctional::point_eval(1, 1);
    CHECK(apply_functional(e1d, GenLaurentElement::monomial(1, 2)) == 2);

    // combinations fold termwise
    auto combo = R.scaled(3) + e1d - cm1.scaled(2);
    auto f = GenLaurentElement::from_laurent_poly(M("1", "2") + M("5", "-1"));
    // 3 f(1) + f'(1) - 2 c_{-1}(f) = 18 - 3 - 10
    CHECK(apply_functional(combo, f) == 5);

    // evaluation points must stay inside (0,1]
    CHECK_THROWS_AS(BoundaryFunctional::point_eval(Q("3/2")), std::invalid_argument);

    // normalization merges duplicate bases and drops cancellations
    auto z = R - R;
    CHECK(z.is_zero());
}

TEST_CASE("evaluation matrices of the model kernel") {
    auto u1 = GenLaurentElement::monomial(1, -1);
    auto u2 = GenLaurentElement::monomial(1, 1);
    auto cm1 = BoundaryFunctional::coefficient(-1);
    auto c1 = BoundaryFunctional::coefficient(1);
    auto R = BoundaryFunctional::point_eval(1);

    Mat E = evaluation_matrix({cm1, R}, {u1, u2});
    CHECK(E.at(0, 0) == 1);
    CHECK(E.at(0, 1) == 0);
    CHECK(E.at(1, 0) == 1);
    CHECK(E.at(1, 1) == 1);

    Mat D = evaluation_matrix({cm1, c1}, {u1, u2});
    CHECK(D == Mat::identity(2));

    Mat Z = evaluation_matrix({cm1, R}, {u1, GenLaurentElement::zero()});
    CHECK(Z.at(0, 1) == 0);
    CHECK(Z.at(1, 1) == 0);
}

TEST_CASE("canonical functionals of the catalog systems") {
    auto fs = fundamental_system(make_op(MODEL), 12);
    auto cs = canonical_functionals(fs);
    REQUIRE(cs.betas.size() == 2);
    CHECK(cs.betas[0] == BoundaryFunctional::coefficient(-1));
    CHECK(cs.betas[1] == BoundaryFunctional::coefficient(1));
    CHECK(cs.E == Mat::identity(2));
    CHECK(element_equal(cs.fs.u[0], GenLaurentElement::monomial(1, -1)));
    CHECK(element_equal(cs.fs.u[1], GenLaurentElement::monomial(1, 1)));

    auto ivp = canonical_functionals(fundamental_system(make_op(IVP), 12));
    CHECK(ivp.betas[0] == BoundaryFunctional::coefficient(-2));
    CHECK(ivp.betas[1] == BoundaryFunctional::coefficient(-1));
    CHECK(ivp.E == Mat::identity(2));

    // half-integer classes read off the fractional coefficient ladder
    auto euler = canonical_functionals(
        fundamental_system(make_op({"-1/(4*x^2)", "1/x", "1"}), 12));
    CHECK(euler.betas[0] == BoundaryFunctional::coefficient(-1, Q("1/2")));
    CHECK(euler.betas[1] == BoundaryFunctional::coefficient(0, Q("1/2")));
}

TEST_CASE("canonical functionals break ties by subtraction") {
    FundamentalSystem fs;
    fs.u.push_back(GenLaurentElement::monomial(1, -1));
    fs.u.push_back(GenLaurentElement::from_laurent_poly(M("1", "-1") + M("1", "0")));
    fs.roots = {Q("-1"), Q("-1")};
    fs.W = GenLaurentElement::zero();

    auto cs = canonical_functionals(fs);
    CHECK(cs.betas[0] == BoundaryFunctional::coefficient(-1));
    CHECK(cs.betas[1] == BoundaryFunctional::coefficient(0));
    CHECK(element_equal(cs.fs.u[1], GenLaurentElement::monomial(1, 0)));
    CHECK(cs.E.at(0, 1) == 0);
    CHECK(cs.E.at(1, 1) == 1);

    // a tie that cancels every known coefficient cannot be certified
    FundamentalSystem bad;
    auto base = GenLaurentElement::from_laurent_poly(M("1", "-1") + M("1", "1"));
    bad.u.push_back(base);
    bad.u.push_back(element_truncate(base, 1));
    bad.roots = {Q("-1"), Q("-1")};
    bad.W = GenLaurentElement::zero();
    CHECK_THROWS_AS(canonical_functionals(bad), TruncationExceeded);

    // identical exact solutions are a degenerate system
    FundamentalSystem dup;
    dup.u = {base, base};
    dup.roots = {Q("-1"), Q("-1")};
    dup.W = GenLaurentElement::zero();
    CHECK_THROWS_AS(canonical_functionals(dup), WronskianDegenerate);
}

TEST_CASE("canonical evaluation matrices are lower unitriangular on random systems") {
    std::uniform_int_distribution<int> size(1, 3);
    std::uniform_int_distribution<int> frac(0, 1);
    std::uniform_int_distribution<int> lo(-3, 1);
    std::uniform_int_distribution<int> width(0, 3);
    std::uniform_int_distribution<int> num(-5, 5);
    std::uniform_int_distribution<int> den(1, 3);

    int checked = 0;
    while (checked < 25) {
        FundamentalSystem fs;
        size_t n = size(rng);
        Rational mu = frac(rng) ? Q("1/2") : Q("0");
        for (size_t i = 0; i < n; ++i) {
            GenLaurentPoly p;
            int N = lo(rng), w = width(rng);
            for (int k = N; k <= N + w; ++k) {
                Rational c(num(rng), den(rng));
                if (c != 0) p += GenLaurentPoly::monomial(c, k);
            }
            if (p.is_zero()) p = GenLaurentPoly::monomial(1, N);
            fs.u.push_back(GenLaurentElement::from_laurent_poly(
                p * GenLaurentPoly::monomial(1, mu)));
        }
        fs.roots.assign(n, 0);
        fs.W = GenLaurentElement::zero();

        CanonicalSystem cs;
        try {
            cs = canonical_functionals(fs);
        } catch (const WronskianDegenerate&) {
            continue; // dependent draw
        }
        ++checked;
        REQUIRE(cs.E.rows == n);
        for (size_t i = 0; i < n; ++i) {
            CHECK(cs.E.at(i, i) == 1);
            for (size_t j = i + 1; j < n; ++j) CHECK(cs.E.at(i, j) == 0);
        }
        for (size_t i = 0; i + 1 < n; ++i) {
            const auto& a = cs.betas[i].terms.at(0).base;
            const auto& b = cs.betas[i + 1].terms.at(0).base;
            CHECK(Rational(a.k) + a.mu < Rational(b.k) + b.mu);
        }
    }
}

TEST_CASE("boundary space assembly and the trading story") {
    auto fs = fundamental_system(make_op(MODEL), 12);
    auto cs = canonical_functionals(fs);
    auto space = build_boundary_space(cs);
    REQUIRE(space.curbing.size() == 1);
    CHECK(space.curbing[0].mu == 0);
    CHECK(space.curbing[0].k_mu == -1);
    CHECK(space.regular_count == 2);

    // trading the endpoint evaluation replaces the highest eligible slot
    auto R = BoundaryFunctional::point_eval(1);
    auto [s1, o1] = trade_or_annex(space, R, cs.fs);
    CHECK(o1.kind == ImposeKind::Traded);
    CHECK(o1.index == 1);
    CHECK(s1.finite_part[1] == R);
    CHECK(regularity_check(s1.finite_part, cs.fs));

    // re-imposing the pole-order condition self-trades into its own slot
    auto [s2, o2] = trade_or_annex(s1, BoundaryFunctional::coefficient(-1), cs.fs);
    CHECK(o2.kind == ImposeKind::Traded);
    CHECK(o2.index == 0);

    // the constant-coefficient condition is invisible on the kernel: annexed
    auto [s3, o3] = trade_or_annex(s2, BoundaryFunctional::coefficient(0), cs.fs);
    CHECK(o3.kind == ImposeKind::Annexed);
    CHECK(o3.accessible_shrunk);
    CHECK(s3.finite_part.size() == 3);
    CHECK(s3.regular_count == 2);

    // deeper pole conditions are already carried by the curbing family
    auto [s4, o4] = trade_or_annex(s3, BoundaryFunctional::coefficient(-2), cs.fs);
    CHECK(o4.kind == ImposeKind::RedundantCurbing);
    CHECK(s4.finite_part.size() == 3);

    CHECK(semi_regularity_check(s4, cs.fs));
    CHECK(regularity_check({s4.finite_part[0], s4.finite_part[1]}, cs.fs));

    // a single condition cannot pin down a two-dimensional kernel
    CHECK_FALSE(regularity_check({BoundaryFunctional::coefficient(1)}, cs.fs));
}

TEST_CASE("pinned slots push later impositions into annexation") {
    auto fs = fundamental_system(make_op(IVP), 12);
    auto cs = canonical_functionals(fs);
    auto space = build_boundary_space(cs);

    // pin the pole-order block, then the regularized initial values
    auto [s1, o1] = trade_or_annex(space, BoundaryFunctional::coefficient(-2), cs.fs);
    CHECK(o1.kind == ImposeKind::Traded);
    auto [s2, o2] = trade_or_annex(s1, BoundaryFunctional::coefficient(-1), cs.fs);
    CHECK(o2.kind == ImposeKind::Traded);
    auto [s3, o3] = trade_or_annex(s2, BoundaryFunctional::coefficient(0), cs.fs);
    CHECK(o3.kind == ImposeKind::Annexed);
    auto [s4, o4] = trade_or_annex(s3, BoundaryFunctional::coefficient(1), cs.fs);
    CHECK(o4.kind == ImposeKind::Annexed);

    // the endpoint value acts on the kernel, but both slots are pinned: it
    // can only be appended, shrinking the accessible space
    auto [s5, o5] = trade_or_annex(s4, BoundaryFunctional::point_eval(1), cs.fs);
    CHECK(o5.kind == ImposeKind::Annexed);
    CHECK(o5.accessible_shrunk);
    CHECK(s5.finite_part.size() == 5);
    CHECK(s5.regular_count == 2);
    CHECK(semi_regularity_check(s5, cs.fs));
}

TEST_CASE("kernel projector of the model problem") {
    auto fs = fundamental_system(make_op(MODEL), 12);
    std::vector<BoundaryFunctional> betas = {BoundaryFunctional::coefficient(-1),
                                             BoundaryFunctional::point_eval(1)};

    auto duals = dual_functionals(fs, betas);
    CHECK(duals[0] == BoundaryFunctional::coefficient(-1));
    CHECK(duals[1] ==
          BoundaryFunctional::point_eval(1) - BoundaryFunctional::coefficient(-1));

    auto P = kernel_projector(fs, betas);
    IntDiffOperator expected;
    expected.bdry.push_back({M("1", "-1") + M("-1", "1"), Functional::coefficient(-1), false,
                             GenLaurentPoly::constant(1)});
    expected.bdry.push_back(
        {M("1", "1"), Functional::point_eval(1), false, GenLaurentPoly::constant(1)});
    CHECK(P == normalize(std::move(expected)));

    // fixes the kernel, collapses the complement
    CHECK(element_equal(apply_to_series(P, fs.u[0]), fs.u[0]));
    CHECK(element_equal(apply_to_series(P, fs.u[1]), fs.u[1]));
    CHECK(element_equal(apply_to_series(P, GenLaurentElement::monomial(1, 2)),
                        GenLaurentElement::monomial(1, 1)));

    CHECK(normalize_compose(P, P) == P);

    for (int t = 0; t < 10; ++t) {
        auto f = rand_elem();
        auto residual = f - apply_to_series(P, f);
        for (const auto& b : betas) CHECK(apply_functional(b, residual) == 0);
    }

    CHECK_THROWS_AS(
        kernel_projector(fs, {BoundaryFunctional::coefficient(-1),
                              BoundaryFunctional::coefficient(-1)}),
        SingularEvaluationMatrix);
}

TEST_CASE("boundary serialization") {
    auto fs = fundamental_system(make_op(MODEL), 12);
    auto cs = canonical_functionals(fs);
    auto space = build_boundary_space(cs);
    auto js = boundary_space_to_json(space);
    CHECK(js.find("\"k_below\":-1") != std::string::npos);
    CHECK(js.find("\"coeff\"") != std::string::npos);

    auto bj = boundary_functional_to_json(BoundaryFunctional::point_eval(1, 2));
    CHECK(bj.find("\"kind\":\"eval\"") != std::string::npos);
    CHECK(bj.find("\"deriv\":2") != std::string::npos);
}
