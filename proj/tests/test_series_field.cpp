#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "greenbp/expr.hpp"
#include "greenbp/laurent.hpp"
#include "greenbp/linalg.hpp"
#include "greenbp/poly.hpp"
#include "greenbp/rational.hpp"

#include <random>

using namespace greenbp;

static Rational Q(const char* s) { return parse_rational(s); }

// deterministic random elements for the property tests
static std::mt19937 rng(20240817);

static Rational rand_rat(int span = 6) {
    std::uniform_int_distribution<int> num(-span, span);
    std::uniform_int_distribution<int> den(1, 4);
    return Rational(num(rng), den(rng));
}

static GenLaurentElement rand_element(bool allow_fractional = true, bool allow_negative = true) {
    GenLaurentPoly p;
    std::uniform_int_distribution<int> nterms(1, 7);
    std::uniform_int_distribution<int> kdist(allow_negative ? -4 : 0, 6);
    std::uniform_int_distribution<int> mudist(0, allow_fractional ? 2 : 0);
    int n = nterms(rng);
    for (int i = 0; i < n; ++i) {
        Rational mu = Rational(mudist(rng), 3); // 0, 1/3, 2/3
        Rational e = Rational(kdist(rng)) + mu;
        Rational c = rand_rat();
        if (c != 0) p += GenLaurentPoly::monomial(c, e);
    }
    return GenLaurentElement::from_laurent_poly(p);
}

TEST_CASE("rational parsing and rendering") {
    CHECK(parse_rational("3/4") == Rational(3, 4));
    CHECK(parse_rational("-12") == Rational(-12));
    CHECK(parse_rational(" 7 / 2 ") == Rational(7, 2));
    CHECK_THROWS_AS(parse_rational("1/0"), ParseError);
    CHECK_THROWS_AS(parse_rational("0.5"), ParseError);
    CHECK(rat_to_string(Rational(-3, 7)) == "-3/7");
    CHECK(rat_to_string(Rational(5)) == "5");

    CHECK(rat_to_decimal(Rational(1, 2)) == "0.5");
    CHECK(rat_to_decimal(Rational(0)) == "0");
    CHECK(rat_to_decimal(Rational(-1, 3)) == "-0.333333333333333");
    CHECK(rat_to_decimal(Rational(2, 3)) == "0.666666666666667");
    CHECK(rat_to_decimal(Rational(1, 12)) == "0.0833333333333333");
    CHECK(rat_to_decimal(Rational(100)) == "100");
    CHECK(rat_to_decimal(Rational(1, 1000000000)) == "1e-9");

    CHECK(rat_floor(Q("-3/2")) == -2);
    CHECK(rat_frac(Q("-3/2")) == Q("1/2"));
    CHECK(rat_frac(Q("7/3")) == Q("1/3"));
    CHECK(rat_pow(Q("2/3"), -2) == Q("9/4"));
}

TEST_CASE("polynomial core") {
    Poly p(std::vector<Rational>{Q("-1"), Q("0"), Q("1")}); // x^2 - 1
    Poly q(std::vector<Rational>{Q("1"), Q("1")});          // x + 1
    auto [quo, rem] = poly_divmod(p, q);
    CHECK(quo == Poly(std::vector<Rational>{Q("-1"), Q("1")}));
    CHECK(rem.is_zero());
    CHECK(poly_gcd(p, q) == q);
    CHECK(p.eval(Q("3")) == 8);
    CHECK(p.derivative() == Poly(std::vector<Rational>{Q("0"), Q("2")}));
    CHECK(p.compose_scale(Q("2")).eval(Q("1")) == p.eval(Q("2")));
}

TEST_CASE("root counting and rational roots") {
    // (x-1/2)(x-2)(x^2+1)
    Poly p(std::vector<Rational>{Q("1"), Q("0"), Q("1")});
    p *= Poly(std::vector<Rational>{Q("-1/2"), Q("1")});
    p *= Poly(std::vector<Rational>{Q("-2"), Q("1")});
    CHECK(count_real_roots(p, Q("0"), Q("1")) == 1);
    CHECK(count_real_roots(p, Q("0"), Q("3")) == 2);
    // endpoint semantics: (lo, hi] includes hi, excludes lo
    CHECK(count_real_roots(p, Q("1/2"), Q("2")) == 1);
    CHECK(count_real_roots(p, Q("0"), Q("1/2")) == 1);

    auto rr = rational_roots(p);
    REQUIRE(rr.roots.size() == 2);
    CHECK(rr.roots[0].first == Q("1/2"));
    CHECK(rr.roots[1].first == Q("2"));
    CHECK(rr.cofactor == Poly(std::vector<Rational>{Q("1"), Q("0"), Q("1")}));

    // radius: poles of 1/((1-x)(x^2+2)) — rational pole at 1 dominates
    Poly den(std::vector<Rational>{Q("1"), Q("-1")});
    den *= Poly(std::vector<Rational>{Q("2"), Q("0"), Q("1")});
    auto r = expansion_radius(den);
    REQUIRE(r.has_value());
    CHECK(*r <= Q("1"));
    CHECK(*r > Q("1/2"));
    // monomial denominator: entire
    CHECK(!expansion_radius(Poly::monomial(Q("3"), 2)).has_value());
}

TEST_CASE("expression parser") {
    CHECK(expr_to_rational_function(parse_expression("(x+1)/(x*(x-1)^2)")).to_string() ==
          "(x + 1)/(x^3 - 2*x^2 + x)");
    CHECK_THROWS_AS(parse_expression("0.5*x"), ParseError);
    CHECK_THROWS_AS(parse_expression("y+1"), ParseError);
    CHECK(expr_to_laurent_poly(parse_expression("-1/x^2")) ==
          GenLaurentPoly::monomial(-1, -2));
    CHECK(expr_to_laurent_poly(parse_expression("x^(1/2)*3 + x^(-3/2)")) ==
          GenLaurentPoly::monomial(3, Q("1/2")) + GenLaurentPoly::monomial(1, Q("-3/2")));
    CHECK_THROWS_AS(expr_to_rational_function(parse_expression("x^(1/2)")), ParseError);
    CHECK_THROWS_AS(expr_to_laurent_poly(parse_expression("(x+1)^(1/2)")), ParseError);
    CHECK(expr_to_rational_function(parse_expression("x^-2")).to_string() == "1/x^2");

    // forcing: exact when Laurent, expanded otherwise
    GenLaurentElement f = parse_forcing("1/(1-x)", 5);
    CHECK(!f.is_exact());
    for (long k = 0; k <= 5; ++k) CHECK(coeff_extract(f, k, 0) == 1);
    CHECK_THROWS_AS(coeff_extract(f, 6, 0), TruncationExceeded);
    GenLaurentElement g = parse_forcing("x^(1/2) - 2/x", 5);
    CHECK(g.is_exact());
    CHECK(coeff_extract(g, 0, Q("1/2")) == 1);
    CHECK(coeff_extract(g, -1, 0) == -2);
}

TEST_CASE("element arithmetic and windows") {
    GenLaurentElement a = parse_forcing("1/(1-x)", 8);  // truncated, radius 1
    GenLaurentElement b = parse_forcing("1-x", 20);     // exact
    GenLaurentElement prod = a * b;
    CHECK(element_equal_window(prod, GenLaurentElement::monomial(1, 0)));
    // window of the product: min(K1+N2, K2+N1) = min(9+0, inf+0) = 9
    CHECK(coeff_extract(prod, 8, 0) == 0);
    CHECK_THROWS_AS(coeff_extract(prod, 9, 0), TruncationExceeded);

    // laurent_expand(rf) * laurent_expand(1/rf) = 1 up to truncation
    for (int trial = 0; trial < 20; ++trial) {
        Poly num(std::vector<Rational>{Q("1"), rand_rat(), rand_rat()});
        Poly den(std::vector<Rational>{Q("1"), rand_rat(), rand_rat()});
        if (num.is_zero() || num.coeff(0) == 0) continue;
        RationalFunction rf{num, den};
        rf.reduce();
        GenLaurentElement u = laurent_expand(rf, 12);
        GenLaurentElement v = laurent_expand(RationalFunction{den, num}, 12);
        CHECK(element_equal_window(u * v, GenLaurentElement::monomial(1, 0)));
    }
}

TEST_CASE("derivative and integral") {
    // d/dx x^(1/2) = (1/2) x^(-1/2)
    GenLaurentElement h = GenLaurentElement::monomial(1, Q("1/2"));
    CHECK(element_equal(differentiate(h), GenLaurentElement::monomial(Q("1/2"), Q("-1/2"))));

    // integral from 1 kills constants of integration: value at 1 is 0 exactly
    for (int trial = 0; trial < 100; ++trial) {
        GenLaurentElement u = rand_element();
        if (residue_coefficient(u) != 0) u = u - GenLaurentElement::monomial(residue_coefficient(u), -1);
        GenLaurentElement v = integrate_rb(u);
        CHECK(element_equal_window(differentiate(v), u));
        PartialValue pv = evaluate_partial(v, 1);
        CHECK(pv.value == 0);
    }

    CHECK_THROWS_AS(integrate_rb(GenLaurentElement::monomial(2, -1)), LogObstruction);
    CHECK(integrate_rb(GenLaurentElement::monomial(2, -1), /*drop_residue=*/true).is_exactly_zero());

    // Leibniz on random pairs
    for (int trial = 0; trial < 50; ++trial) {
        GenLaurentElement u = rand_element(), v = rand_element();
        CHECK(element_equal_window(differentiate(u * v),
                                   differentiate(u) * v + u * differentiate(v)));
    }
}

TEST_CASE("projections") {
    GenLaurentElement u = parse_forcing("x^(-3/2) + 2/x + 3 + x^(1/2) + 5*x^2", 10);
    GenLaurentElement pp = project_component(u, ComponentPart::pp);
    GenLaurentElement reg = project_component(u, ComponentPart::reg);
    CHECK(element_equal(pp, parse_forcing("x^(-3/2) + 2/x", 10)));
    CHECK(element_equal(reg, parse_forcing("3 + x^(1/2) + 5*x^2", 10)));
    CHECK(element_equal(project_component(u, ComponentPart::indicial, Q("1/2")),
                        parse_forcing("x^(-3/2) + x^(1/2)", 10)));

    for (int trial = 0; trial < 50; ++trial) {
        GenLaurentElement w = rand_element();
        GenLaurentElement p = project_component(w, ComponentPart::pp);
        GenLaurentElement r = project_component(w, ComponentPart::reg);
        CHECK(element_equal_window(p + r, w));
        CHECK(element_equal(project_component(p, ComponentPart::pp), p));
        CHECK(project_component(p, ComponentPart::reg).is_zero());
    }
}

TEST_CASE("coefficient functionals") {
    GenLaurentElement u = parse_forcing("x^(1/2)*(1 + x^2)", 10);
    CHECK(coeff_extract(u, 2, Q("1/2")) == 1);
    CHECK(coeff_extract(u, 1, Q("1/2")) == 0);
    CHECK(coeff_extract(u, 0, 0) == 0);
}

TEST_CASE("partial evaluation with tail bounds") {
    // (x - 1) at 1 -> 0 exactly, tail 0
    GenLaurentElement u = parse_forcing("x-1", 5);
    PartialValue pv = evaluate_partial(u, 1);
    CHECK(pv.value == 0);
    REQUIRE(pv.tail_bound.has_value());
    CHECK(*pv.tail_bound == 0);

    // truncated geometric series at 1/2: value 15/8, certified tail
    GenLaurentElement g = parse_forcing("1/(1-x)", 3);
    pv = evaluate_partial(g, Q("1/2"));
    CHECK(pv.value == Q("15/8"));
    REQUIRE(pv.tail_bound.has_value());
    CHECK(*pv.tail_bound == Q("1/8")); // C=1, (x0/r)^4 / (1 - x0/r)
    // true tail is 2 - 15/8 = 1/8: the bound is tight here

    // x^-1 at 1/4 -> 4
    pv = evaluate_partial(GenLaurentElement::monomial(1, -1), Q("1/4"));
    CHECK(pv.value == 4);

    // fractional power: x^(1/2) at 1/4 -> 1/2 within the enclosure width
    pv = evaluate_partial(GenLaurentElement::monomial(1, Q("1/2")), Q("1/4"));
    REQUIRE(pv.tail_bound.has_value());
    Rational err = pv.value - Q("1/2");
    if (err < 0) err = -err;
    CHECK(err <= *pv.tail_bound);
    CHECK(*pv.tail_bound < Q("1/1000000000"));

    // beyond the radius: unknown
    pv = evaluate_partial(g, Q("1"));
    CHECK(!pv.tail_bound.has_value());
}

TEST_CASE("falling factorial") {
    CHECK(falling_factorial(5, 2) == 20);
    CHECK(falling_factorial(3, 5) == 0);
    CHECK(falling_factorial(Q("7/2"), 0) == 1);
    CHECK(falling_factorial(Q("1/2"), 2) == Q("-1/4"));
}

TEST_CASE("log payload") {
    // d/dx (x log x) = log x + 1
    LogElement xl{GenLaurentElement::zero(), GenLaurentElement::monomial(1, 1)};
    LogElement d = log_differentiate(xl);
    CHECK(element_equal(d.base, GenLaurentElement::monomial(1, 0)));
    CHECK(element_equal(d.logpart, GenLaurentElement::monomial(1, 0)));

    // integral from 1 of 1/x = log x
    LogElement li = log_integrate_rb({GenLaurentElement::monomial(1, -1), {}});
    CHECK(li.base.is_zero());
    CHECK(element_equal(li.logpart, GenLaurentElement::monomial(1, 0)));

    // round trip: d/dx of the integral is the integrand
    GenLaurentElement f = parse_forcing("2/x + 3 + x", 10);
    LogElement F = log_integrate_rb({f, {}});
    LogElement dF = log_differentiate(F);
    CHECK(element_equal_window(dF.base, f));
    CHECK(dF.logpart.is_zero());

    CHECK_THROWS_AS(log_integrate_rb({GenLaurentElement::zero(),
                                      GenLaurentElement::monomial(1, -1)}),
                    LogObstruction);

    // numeric agreement: integral from 1 to x of (1/t + t) = log x + (x^2-1)/2
    LogElement I = log_integrate_rb({parse_forcing("1/x + x", 10), {}});
    double x0 = 0.37;
    double expect = std::log(x0) + (x0 * x0 - 1) / 2;
    CHECK(std::abs(log_evaluate_double(I, x0) - expect) < 1e-14);
}

TEST_CASE("exact linear algebra") {
    Mat m(3, 3);
    Rational vals[9] = {Q("2"), Q("1"), Q("-1"), Q("-3"), Q("-1"), Q("2"), Q("-2"), Q("1"), Q("2")};
    for (int i = 0; i < 9; ++i) m.a[i] = vals[i];
    CHECK(det(m) == -1);
    CHECK(rank(m) == 3);
    auto inv = inverse(m);
    REQUIRE(inv.has_value());
    CHECK(*inv * m == Mat::identity(3));
    auto x = solve(m, {Q("8"), Q("-11"), Q("-3")});
    REQUIRE(x.has_value());
    CHECK((*x)[0] == 2);
    CHECK((*x)[1] == 3);
    CHECK((*x)[2] == -1);

    Mat s(2, 3);
    s.at(0, 0) = 1; s.at(0, 1) = 2; s.at(0, 2) = 3;
    s.at(1, 0) = 2; s.at(1, 1) = 4; s.at(1, 2) = 6;
    CHECK(rank(s) == 1);
    Mat ns = nullspace(s);
    CHECK(ns.cols == 2);
    // each column annihilated
    for (size_t c = 0; c < ns.cols; ++c) {
        Rational acc = 0;
        for (size_t j = 0; j < 3; ++j) acc += s.at(0, j) * ns.at(j, c);
        CHECK(acc == 0);
    }
}
