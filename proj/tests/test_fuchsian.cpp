#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "greenbp/expr.hpp"
#include "greenbp/fuchsian.hpp"

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

static std::mt19937 rng(911803);

static GenLaurentElement rand_poly(int maxdeg = 6) {
    std::uniform_int_distribution<int> deg(0, maxdeg);
    std::uniform_int_distribution<int> num(-6, 6);
    std::uniform_int_distribution<int> den(1, 4);
    GenLaurentPoly p;
    int d = deg(rng);
    for (int i = 0; i <= d; ++i) {
        Rational c(num(rng), den(rng));
        if (c != 0) p += GenLaurentPoly::monomial(c, i);
    }
    if (p.is_zero()) p = GenLaurentPoly::constant(1);
    return GenLaurentElement::from_laurent_poly(p);
}

// the model problem: u'' + u'/x - u/x^2, fundamental system {1/x, x}
static const std::vector<std::string> MODEL = {"-1/x^2", "1/x", "1"};
// initial-value flavor: u'' + 4u'/x + 2u/x^2, fundamental system {1/x^2, 1/x}
static const std::vector<std::string> IVP = {"2/x^2", "4/x", "1"};

TEST_CASE("construction validates the coefficient family") {
    CHECK_NOTHROW(make_op(MODEL));
    CHECK_NOTHROW(make_op(IVP));

    // leading coefficient vanishing inside the interval
    CHECK_THROWS_AS(make_op({"1", "1", "x - 1/2"}), NotFuchsian);
    // pole of a lower coefficient inside the interval
    CHECK_THROWS_AS(make_op({"1/(x - 1/2)", "0", "1"}), NotFuchsian);
    // pole at 0 too deep for the order (irregular singularity)
    CHECK_THROWS_AS(make_op({"1/x^3", "0", "1"}), NotFuchsian);
    // order zero is not a differential operator
    CHECK_THROWS_AS(make_op({"1"}), NotFuchsian);
}

TEST_CASE("indicial data of the catalog operators") {
    FuchsianOperator op = make_op(MODEL);
    IndicialData id = indicial_data(op);
    // s(s-1) + s - 1 = s^2 - 1
    CHECK(id.indicial == Poly(std::vector<Rational>{-1, 0, 1}));
    REQUIRE(id.roots.size() == 2);
    CHECK(id.roots[0] == -1);
    CHECK(id.roots[1] == 1);
    CHECK(id.mu_classes == std::vector<Rational>{Rational(0)});

    IndicialData iv = indicial_data(make_op(IVP));
    // s(s-1) + 4s + 2 = s^2 + 3s + 2
    REQUIRE(iv.roots.size() == 2);
    CHECK(iv.roots[0] == -2);
    CHECK(iv.roots[1] == -1);

    // s^2 - 1/4: fractional roots, one ramification class
    IndicialData eu = indicial_data(make_op({"-1/(4*x^2)", "1/x", "1"}));
    CHECK(eu.roots[0] == Q("-1/2"));
    CHECK(eu.roots[1] == Q("1/2"));
    CHECK(eu.mu_classes == std::vector<Rational>{Q("1/2")});

    // s^2 - s/2: mixed classes {0, 1/2}
    IndicialData mx = indicial_data(make_op({"0", "1/(2*x)", "1"}));
    CHECK(mx.roots[0] == 0);
    CHECK(mx.roots[1] == Q("1/2"));
    REQUIRE(mx.mu_classes.size() == 2);

    // s^2 - 2 does not split over Q
    CHECK_THROWS_AS(indicial_data(make_op({"-2/x^2", "1/x", "1"})), IrrationalIndicialRoots);
}

TEST_CASE("series solutions at the exact catalog roots") {
    FuchsianOperator op = make_op(MODEL);
    GenLaurentElement u1 = frobenius_solution(op, -1, 40);
    GenLaurentElement u2 = frobenius_solution(op, 1, 40);
    REQUIRE(u1.is_exact());
    REQUIRE(u2.is_exact());
    CHECK(u1.to_laurent_poly() == GenLaurentPoly::monomial(1, -1));
    CHECK(u2.to_laurent_poly() == GenLaurentPoly::monomial(1, 1));

    // residuals vanish identically
    CHECK(apply_operator(op, u1).is_exactly_zero());
    CHECK(apply_operator(op, u2).is_exactly_zero());

    CHECK_THROWS_AS(frobenius_solution(op, Q("1/3"), 40), std::domain_error);
}

TEST_CASE("resonance handling") {
    // s^2: repeated root, a log companion is unavoidable
    FuchsianOperator rep = make_op({"0", "1/x", "1"});
    try {
        frobenius_solution(rep, 0, 20);
        FAIL("expected a resonance report");
    } catch (const ResonantObstruction& e) {
        CHECK(std::string(e.what()).find("(0, 0)") != std::string::npos);
    }

    // x u'' - u: roots {0, 1}; the recursion at the smaller root hits a
    // nonzero source at offset 1
    FuchsianOperator bes = make_op({"-1", "0", "x"});
    IndicialData id = indicial_data(bes);
    REQUIRE(id.roots == std::vector<Rational>{Rational(0), Rational(1)});
    try {
        frobenius_solution(bes, 0, 20);
        FAIL("expected a resonance report");
    } catch (const ResonantObstruction& e) {
        CHECK(std::string(e.what()).find("(0, 1)") != std::string::npos);
    }
    // ... while the larger root is clean
    CHECK_NOTHROW(frobenius_solution(bes, 1, 20));

    // integer-distance roots whose resonant source happens to vanish: the
    // model operator itself (gap 2 between -1 and 1)
    CHECK_NOTHROW(frobenius_solution(make_op(MODEL), -1, 20));
}

TEST_CASE("fundamental systems, Wronskians, variation tails") {
    FuchsianOperator op = make_op(MODEL);
    FundamentalSystem fs = fundamental_system(op, 40);
    REQUIRE(fs.u.size() == 2);
    CHECK(fs.W.is_exact());
    CHECK(fs.W.to_laurent_poly() == GenLaurentPoly::monomial(2, -1)); // 2/x

    std::vector<GenLaurentElement> t = variation_tails(op, fs, 16);
    REQUIRE(t.size() == 2);
    CHECK(t[0].to_laurent_poly() == GenLaurentPoly::monomial(Q("-1/2"), 2)); // -xi^2/2
    CHECK(t[1].to_laurent_poly() == GenLaurentPoly::constant(Q("1/2")));     // 1/2

    FuchsianOperator iv = make_op(IVP);
    FundamentalSystem fsi = fundamental_system(iv, 40);
    CHECK(fsi.W.to_laurent_poly() == GenLaurentPoly::monomial(1, -4)); // x^-4
    std::vector<GenLaurentElement> ti = variation_tails(iv, fsi, 16);
    CHECK(ti[0].to_laurent_poly() == GenLaurentPoly::monomial(-1, 3)); // -xi^3
    CHECK(ti[1].to_laurent_poly() == GenLaurentPoly::monomial(1, 2));  // xi^2

    // half-integer roots: W = 1/x, tails fractional
    FuchsianOperator eu = make_op({"-1/(4*x^2)", "1/x", "1"});
    FundamentalSystem fse = fundamental_system(eu, 40);
    CHECK(fse.W.to_laurent_poly() == GenLaurentPoly::monomial(1, -1));
    std::vector<GenLaurentElement> te = variation_tails(eu, fse, 16);
    CHECK(te[0].to_laurent_poly() == GenLaurentPoly::monomial(-1, Q("3/2")));
    CHECK(te[1].to_laurent_poly() == GenLaurentPoly::monomial(1, Q("1/2")));
}

TEST_CASE("the right inverse inverts from the right") {
    for (const auto& coeffs :
         {MODEL, IVP, std::vector<std::string>{"-1/(4*x^2)", "1/x", "1"}}) {
        FuchsianOperator op = make_op(coeffs);
        FundamentalSystem fs = fundamental_system(op, 40);
        IntDiffOperator Tdia = fundamental_right_inverse(op, fs);

        for (int trial = 0; trial < 20; ++trial) {
            GenLaurentElement f = rand_poly();
            GenLaurentElement g = apply_to_series(Tdia, f);
            CHECK(element_equal(apply_operator(op, g), f));
            // vanishing initial data at the right endpoint
            for (unsigned j = 0; j < op.n; ++j)
                CHECK(apply_functional_to_element(Functional::point_eval(1, j), g) == 0);
        }
    }
}

TEST_CASE("the model right inverse has the expected normal form") {
    FuchsianOperator op = make_op(MODEL);
    FundamentalSystem fs = fundamental_system(op, 40);
    IntDiffOperator T = fundamental_right_inverse(op, fs);
    REQUIRE(T.integral.size() == 2);
    REQUIRE(T.diff.empty());
    REQUIRE(T.bdry.empty());
    // (x/2)·A·1  and  (-1/(2x))·A·xi^2, in right-factor order
    CHECK(T.integral[0].left == GenLaurentPoly::monomial(Q("1/2"), 1));
    CHECK(T.integral[0].right == GenLaurentPoly::constant(1));
    CHECK(T.integral[1].left == GenLaurentPoly::monomial(Q("-1/2"), -1));
    CHECK(T.integral[1].right == GenLaurentPoly::monomial(1, 2));

    // T^<> 1 = x^2/3 - x/2 + 1/(6x)
    GenLaurentElement g = apply_to_series(T, GenLaurentElement::monomial(1, 0));
    GenLaurentPoly expect;
    expect += GenLaurentPoly::monomial(Q("1/3"), 2);
    expect += GenLaurentPoly::monomial(Q("-1/2"), 1);
    expect += GenLaurentPoly::monomial(Q("1/6"), -1);
    CHECK(g.to_laurent_poly() == expect);
}

TEST_CASE("truncated coefficient data: solutions, windows, Abel identity") {
    // a pole at 2 keeps the expansions honest series
    FuchsianOperator op = make_op({"1/(x - 2)", "2/x", "1"});
    IndicialData id = indicial_data(op);
    REQUIRE(id.roots == std::vector<Rational>{Rational(-1), Rational(0)});

    const long trunc = 30;
    FundamentalSystem fs = fundamental_system(op, trunc);
    for (size_t i = 0; i < 2; ++i) {
        const auto& s = fs.u[i].comp.begin()->second;
        CHECK_FALSE(s.top == std::nullopt);
        CHECK(*s.top == s.N + trunc + 1);
        CHECK(s.radius.has_value());
        CHECK(*s.radius == 2); // the nearest pole of the expansions
        // the residual has no known nonzero coefficient
        CHECK(apply_operator(op, fs.u[i]).is_zero());
    }

    // W' = -p1 W
    GenLaurentElement lhs = differentiate(fs.W);
    GenLaurentElement rhs = -element_mul(laurent_expand(op.p[1], 40), fs.W);
    CHECK(element_equal_window(lhs, rhs));
}

TEST_CASE("scaled clamped-membrane operator: series mode end to end") {
    // rho-scaled radial operator moved to the unit interval with scale 9/10:
    // poles sit at 10/9, outside the closed interval
    const std::string b = "9/10";
    FuchsianOperator op = make_op({
        "-1/((" + b + "*x)*(1 - " + b + "*x))",
        "(1 - 4*(" + b + "*x))/((1 - " + b + "*x)*(" + b + "))",
        "x/(" + b + ")",
    });
    IndicialData id = indicial_data(op);
    REQUIRE(id.roots == std::vector<Rational>{Rational(-1), Rational(1)});
    CHECK_FALSE(op.exact_coefficients());

    const long trunc = 80;
    FundamentalSystem fs = fundamental_system(op, trunc);
    // Wronskian ~ C/x; tails: t1 analytic, t2 ~ 1/x
    {
        const auto& w = fs.W.comp.at(Rational(0));
        CHECK(w.N == -1);
        CHECK(*w.radius == Q("10/9"));
    }
    std::vector<GenLaurentElement> t = variation_tails(op, fs, 60);
    CHECK(t[0].comp.at(Rational(0)).N == 1);
    CHECK(t[1].comp.at(Rational(0)).N == -1);

    // right-inverse law through the log layer: residues of t2·f become
    // log-part coefficients and the operator sends them back to zero
    for (int trial = 0; trial < 5; ++trial) {
        GenLaurentElement f = rand_poly(4);
        LogElement g = apply_right_inverse_log(fs, t, f);
        LogElement back = apply_operator_log(op, g);
        CHECK(back.logpart.is_zero());
        CHECK(element_equal_window(back.base, f));
    }
}

TEST_CASE("exact operator conversion") {
    FuchsianOperator op = make_op(MODEL);
    IntDiffOperator T = operator_as_intdiff(op);
    REQUIRE(T.diff.size() == 3);
    CHECK(T.diff[0].j == 0);
    CHECK(T.diff[0].coeff == GenLaurentPoly::monomial(-1, -2));
    CHECK(T.diff[2].j == 2);
    CHECK(T.diff[2].coeff == GenLaurentPoly::constant(1));

    // nonmonomial denominators cannot be finitary
    CHECK_THROWS_AS(operator_as_intdiff(make_op({"1/(x - 2)", "2/x", "1"})),
                    ExactnessLost);
}
