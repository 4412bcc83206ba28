#include "greenbp/pipeline.hpp"

#include "greenbp/quadrature.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace greenbp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

const json& field(const json& j, const char* name, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    auto it = j.find(name);
    if (it == j.end()) fail(where + "." + name, "missing");
    return *it;
}

Rational read_rational(const json& j, const std::string& where) {
    if (j.is_string()) {
        try {
            return parse_rational(j.get<std::string>());
        } catch (const ParseError& e) {
            fail(where, e.what());
        }
    }
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    if (j.is_number_float())
        fail(where, "decimals are not exact, write a fraction (1/2 instead of 0.5)");
    fail(where, "expected a rational written as a string, e.g. \"-3/2\"");
}

long read_long(const json& j, const std::string& where) {
    if (j.is_number_integer()) return static_cast<long>(j.get<std::int64_t>());
    if (j.is_string()) {
        Rational r = read_rational(j, where);
        if (!rat_is_integer(r)) fail(where, "expected an integer");
        return rat_to_long(r);
    }
    fail(where, "expected an integer");
}

std::string dbl15(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

double poly_at(const Poly& p, double x) {
    double v = 0;
    for (size_t i = p.c.size(); i-- > 0;) v = v * x + rat_to_double(p.c[i]);
    return v;
}

double rf_at(const RationalFunction& rf, double x) {
    return poly_at(rf.num, x) / poly_at(rf.den, x);
}

RationalFunction rf_derivative(const RationalFunction& rf) {
    RationalFunction d{rf.num.derivative() * rf.den - rf.num * rf.den.derivative(),
                       rf.den * rf.den};
    d.reduce();
    return d;
}

// substitute x -> b*x in a Laurent polynomial; only integer exponents scale
// inside Q
GenLaurentPoly scale_laurent(const GenLaurentPoly& p, const Rational& b) {
    if (b == 1) return p;
    GenLaurentPoly out;
    for (const auto& [e, c] : p.t) {
        if (!rat_is_integer(e))
            throw ParseError("forcing with fractional powers cannot be rescaled exactly; "
                             "state the problem on [0,1]");
        out.t[e] = c * rat_pow(b, rat_to_long(e));
    }
    return out;
}

// the closed-form Green's operator is only defined on analytic forcings
void require_analytic(const GenLaurentPoly& f) {
    for (const auto& [e, c] : f.t)
        if (!rat_is_integer(e) || e < 0)
            throw ParseError("the Green's operator acts on analytic forcings; the term x^" +
                             rat_to_string(e) + " falls outside its domain");
}

// forcing (and its derivative) as double-valued functions of the scaled
// variable: g(xh) = f(b*xh), g'(xh) = b*f'(b*xh)
struct ForcingDouble {
    std::function<double(double)> f, df;
};

ForcingDouble make_forcing_double(const Expr& e, const Rational& b) {
    double bd = rat_to_double(b);
    try {
        RationalFunction rf = expr_to_rational_function(e);
        RationalFunction drf = rf_derivative(rf);
        return {[rf, bd](double x) { return rf_at(rf, bd * x); },
                [drf, bd](double x) { return bd * rf_at(drf, bd * x); }};
    } catch (const ParseError&) {
        GenLaurentPoly p = expr_to_laurent_poly(e);
        GenLaurentPoly dp = p.derivative();
        return {[p, bd](double x) { return p.eval_double(bd * x); },
                [dp, bd](double x) { return bd * dp.eval_double(bd * x); }};
    }
}

ConditionSpec parse_condition(const json& j, const std::string& where, const Rational& b) {
    if (j.is_string()) {
        if (j.get<std::string>() == "regularized_zero_at_origin") {
            ConditionSpec c;
            c.regularized_origin = true;
            return c;
        }
        fail(where, "unknown condition keyword '" + j.get<std::string>() +
                        "' (did you mean \"regularized_zero_at_origin\"?)");
    }
    if (!j.is_object())
        fail(where, "expected an object with a \"terms\" array or a keyword string");
    const json& terms = field(j, "terms", where);
    if (!terms.is_array() || terms.empty()) fail(where + ".terms", "expected a nonempty array");

    BoundaryFunctional fn;
    for (size_t i = 0; i < terms.size(); ++i) {
        std::string tw = where + ".terms[" + std::to_string(i) + "]";
        const json& t = terms[i];
        if (!t.is_object()) fail(tw, "expected an object");
        const json& kindj = field(t, "kind", tw);
        if (!kindj.is_string()) fail(tw + ".kind", "expected \"eval\" or \"coeff\"");
        std::string kind = kindj.get<std::string>();
        Rational coeff =
            t.contains("coeff") ? read_rational(t["coeff"], tw + ".coeff") : Rational(1);
        if (kind == "eval") {
            Rational xi = read_rational(field(t, "point", tw), tw + ".point");
            long deriv = t.contains("deriv") ? read_long(t["deriv"], tw + ".deriv") : 0;
            if (deriv < 0) fail(tw + ".deriv", "derivative order must be >= 0");
            if (xi <= 0 || xi > b) fail(tw + ".point", "evaluation points live in (0, b]");
            if (xi > 1)
                fail(tw + ".point",
                     "evaluation points beyond 1 are unsupported; rescale the problem "
                     "so the regular endpoint is at most 1");
            fn = fn + BoundaryFunctional::point_eval(xi, static_cast<unsigned>(deriv)).scaled(coeff);
        } else if (kind == "coeff") {
            long k = read_long(field(t, "k", tw), tw + ".k");
            Rational mu = t.contains("mu") ? read_rational(t["mu"], tw + ".mu") : Rational(0);
            if (mu < 0 || mu >= 1) fail(tw + ".mu", "ramification class mu lives in [0,1)");
            fn = fn + BoundaryFunctional::coefficient(k, mu).scaled(coeff);
        } else {
            fail(tw + ".kind", "expected \"eval\" or \"coeff\"");
        }
    }
    fn.normalize();
    if (fn.is_zero()) fail(where, "the terms cancel to the zero functional");
    ConditionSpec c;
    c.fn = fn;
    return c;
}

} // namespace

ProblemSpec parse_problem_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        size_t upto = std::min(text.size(), static_cast<size_t>(e.byte));
        long line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
        throw ParseError("invalid JSON (line " + std::to_string(line) + "): " + e.what());
    }
    if (!j.is_object()) throw ParseError("problem: expected a JSON object");

    ProblemSpec spec;
    const json& op = field(j, "operator", "problem");
    const json& coeffs = field(op, "coeffs", "operator");
    if (!coeffs.is_array() || coeffs.size() < 2)
        fail("operator.coeffs", "expected an array [a_0 .. a_n] with n >= 1");
    for (size_t i = 0; i < coeffs.size(); ++i) {
        std::string where = "operator.coeffs[" + std::to_string(i) + "]";
        if (!coeffs[i].is_string()) fail(where, "coefficients are expressions written as strings");
        std::string txt = coeffs[i].get<std::string>();
        try {
            spec.coeffs.push_back(expr_to_rational_function(parse_expression(txt)));
        } catch (const ParseError& e) {
            fail(where, e.what());
        }
        spec.coeff_text.push_back(txt);
    }

    if (j.contains("interval")) {
        const json& iv = j["interval"];
        if (!iv.is_object()) fail("interval", "expected an object");
        if (iv.contains("b")) spec.b = read_rational(iv["b"], "interval.b");
        if (spec.b <= 0) fail("interval.b", "the regular endpoint must be positive");
    }

    const json& conds = field(j, "conditions", "problem");
    if (!conds.is_array()) fail("conditions", "expected an array");
    for (size_t i = 0; i < conds.size(); ++i)
        spec.conditions.push_back(
            parse_condition(conds[i], "conditions[" + std::to_string(i) + "]", spec.b));

    if (j.contains("options")) {
        const json& o = j["options"];
        if (!o.is_object()) fail("options", "expected an object");
        if (o.contains("truncation")) spec.truncation = read_long(o["truncation"], "options.truncation");
        if (spec.truncation < 4) fail("options.truncation", "must be at least 4");
    }
    return spec;
}

ProblemSpec parse_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open problem file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_problem_text(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string problem_to_json(const ProblemSpec& spec) {
    json j;
    j["operator"]["coeffs"] = json::array();
    for (size_t i = 0; i < spec.coeffs.size(); ++i) {
        std::string txt = i < spec.coeff_text.size() && !spec.coeff_text[i].empty()
                              ? spec.coeff_text[i]
                              : spec.coeffs[i].to_string();
        j["operator"]["coeffs"].push_back(txt);
    }
    j["interval"]["b"] = rat_to_string(spec.b);
    j["conditions"] = json::array();
    for (const auto& c : spec.conditions) {
        if (c.regularized_origin) {
            j["conditions"].push_back("regularized_zero_at_origin");
            continue;
        }
        json jc;
        jc["terms"] = json::array();
        for (const auto& t : c.fn.terms) {
            json jt;
            if (t.base.kind == Functional::PointEval) {
                jt["kind"] = "eval";
                jt["point"] = rat_to_string(t.base.xi);
                if (t.base.deriv != 0) jt["deriv"] = static_cast<long>(t.base.deriv);
            } else {
                jt["kind"] = "coeff";
                jt["k"] = t.base.k;
                if (t.base.mu != 0) jt["mu"] = rat_to_string(t.base.mu);
            }
            jt["coeff"] = rat_to_string(t.coeff);
            jc["terms"].push_back(jt);
        }
        j["conditions"].push_back(jc);
    }
    j["options"]["truncation"] = spec.truncation;
    return j.dump(2);
}

namespace {

// e_xi D^l picks up s^{-l}, c_{k+mu} picks up s^{-(k+mu)}; the condition is
// projective, so normalize by the smallest exponent (single-term functionals
// come out unchanged).  Mixing exponents that differ by a non-integer would
// need an irrational s^mu.
BoundaryFunctional scale_functional(const BoundaryFunctional& fn, const Rational& s) {
    std::vector<Rational> expo;
    expo.reserve(fn.terms.size());
    for (const auto& t : fn.terms)
        expo.push_back(t.base.kind == Functional::PointEval ? Rational(t.base.deriv)
                                                            : Rational(t.base.k) + t.base.mu);
    Rational emin = *std::min_element(expo.begin(), expo.end());
    BoundaryFunctional out;
    for (size_t i = 0; i < fn.terms.size(); ++i) {
        Rational diff = expo[i] - emin;
        if (!rat_is_integer(diff))
            throw ParseError("cannot rescale a condition mixing exponents that differ by a "
                             "non-integer: '" + fn.to_string() + "'");
        Rational c = fn.terms[i].coeff * rat_pow(s, -rat_to_long(diff));
        const Functional& base = fn.terms[i].base;
        if (base.kind == Functional::PointEval) {
            Rational xi = base.xi / s;
            if (xi <= 0 || xi > 1)
                throw ParseError("condition point " + rat_to_string(base.xi) +
                                 " leaves (0,1] after rescaling");
            out = out + BoundaryFunctional::point_eval(xi, base.deriv).scaled(c);
        } else {
            out = out + BoundaryFunctional::coefficient(base.k, base.mu).scaled(c);
        }
    }
    out.normalize();
    return out;
}

} // namespace

ProblemSpec scale_domain(const ProblemSpec& spec, const Rational& s) {
    if (s <= 0) throw std::invalid_argument("scale_domain: the scale must be positive");
    if (s == 1) return spec;
    ProblemSpec out;
    out.b = spec.b / s;
    out.truncation = spec.truncation;
    for (size_t j = 0; j < spec.coeffs.size(); ++j) {
        RationalFunction rf = spec.coeffs[j].compose_scale(s);
        rf.num = rf.num * rat_pow(s, -static_cast<long>(j));
        out.coeffs.push_back(rf);
        out.coeff_text.push_back(rf.to_string());
    }
    for (const auto& c : spec.conditions) {
        if (c.regularized_origin) {
            out.conditions.push_back(c);
        } else {
            ConditionSpec sc;
            sc.fn = scale_functional(c.fn, s);
            out.conditions.push_back(sc);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// series-backed evaluator

SeriesGreen::Fast SeriesGreen::Fast::make(GenLaurentElement e) {
    Fast f;
    f.exact = std::move(e);
    for (const auto& [mu, s] : f.exact.comp) {
        if (s.a.empty()) continue;
        Run r;
        r.start = rat_to_double(Rational(s.N) + mu);
        r.a.reserve(s.a.size());
        for (const Rational& c : s.a) r.a.push_back(rat_to_double(c));
        f.runs.push_back(std::move(r));
    }
    return f;
}

double SeriesGreen::Fast::at(double x) const {
    double total = 0;
    for (const Run& r : runs) {
        double h = 0;
        for (size_t i = r.a.size(); i-- > 0;) h = h * x + r.a[i];
        total += std::pow(x, r.start) * h;
    }
    return total;
}

namespace {

double series_c1(const SeriesGreen& sg, const std::function<double(double)>& f, double rel_tol) {
    return integrate([&](double xi) { return sg.t1.at(xi) * f(xi); }, 0.0, 1.0, rel_tol);
}

double series_value_c1(const SeriesGreen& sg, double x, const std::function<double(double)>& f,
                       double C1, double rel_tol, double* A1out = nullptr,
                       double* A2out = nullptr) {
    double A1 = 0, A2 = 0;
    if (x < 1.0 - 1e-15) {
        A1 = -integrate([&](double xi) { return sg.t1.at(xi) * f(xi); }, x, 1.0, rel_tol);
        A2 = -integrate([&](double xi) { return sg.t2.at(xi) * f(xi); }, x, 1.0, rel_tol);
    }
    if (A1out) *A1out = A1;
    if (A2out) *A2out = A2;
    return sg.v.at(x) * C1 + sg.u1.at(x) * A1 + sg.u2.at(x) * A2;
}

SeriesGreen build_series_green(const FuchsianOperator& op, const CanonicalSystem& cs,
                               long trunc) {
    const GenLaurentElement& u1 = cs.fs.u[0];
    const GenLaurentElement& u2 = cs.fs.u[1];
    std::vector<GenLaurentElement> tails = variation_tails(op, cs.fs, Rational(trunc));
    Rational r1 = evaluate_partial(u1, 1).value;
    Rational r2 = evaluate_partial(u2, 1).value;
    if (r2 == 0)
        throw NotSemiRegular("the partial sum u_2(1) vanishes; the edge condition cannot "
                             "be normalized against the second kernel solution");
    GenLaurentElement v = element_sub(u1, element_scalar(u2, r1 / r2));
    GenLaurentElement du1 = differentiate(u1), du2 = differentiate(u2), dv = differentiate(v);
    GenLaurentElement s =
        element_add(element_mul(u1, tails[0]), element_mul(u2, tails[1]));
    GenLaurentElement s2 =
        element_add(element_mul(du1, tails[0]), element_mul(du2, tails[1]));

    SeriesGreen sg;
    sg.op = op;
    sg.u1 = SeriesGreen::Fast::make(u1);
    sg.u2 = SeriesGreen::Fast::make(u2);
    sg.t1 = SeriesGreen::Fast::make(tails[0]);
    sg.t2 = SeriesGreen::Fast::make(tails[1]);
    sg.v = SeriesGreen::Fast::make(v);
    sg.du1 = SeriesGreen::Fast::make(du1);
    sg.du2 = SeriesGreen::Fast::make(du2);
    sg.dv = SeriesGreen::Fast::make(dv);
    sg.ddu1 = SeriesGreen::Fast::make(differentiate(du1));
    sg.ddu2 = SeriesGreen::Fast::make(differentiate(du2));
    sg.ddv = SeriesGreen::Fast::make(differentiate(dv));
    sg.ds = SeriesGreen::Fast::make(differentiate(s));
    sg.s = SeriesGreen::Fast::make(std::move(s));
    sg.s2 = SeriesGreen::Fast::make(std::move(s2));
    return sg;
}

} // namespace

double SeriesGreen::value(double x, const std::function<double(double)>& f,
                          double rel_tol) const {
    return series_value_c1(*this, x, f, series_c1(*this, f, rel_tol), rel_tol);
}

void SeriesGreen::value3(double x, const std::function<double(double)>& f,
                         const std::function<double(double)>& df, double out[3],
                         double rel_tol) const {
    double C1 = series_c1(*this, f, rel_tol);
    double A1 = 0, A2 = 0;
    out[0] = series_value_c1(*this, x, f, C1, rel_tol, &A1, &A2);
    double fx = f(x), dfx = df(x);
    out[1] = dv.at(x) * C1 + du1.at(x) * A1 + du2.at(x) * A2 + s.at(x) * fx;
    out[2] = ddv.at(x) * C1 + ddu1.at(x) * A1 + ddu2.at(x) * A2 + s2.at(x) * fx +
             ds.at(x) * fx + s.at(x) * dfx;
}

double SeriesGreen::residual(double x, const std::function<double(double)>& f,
                             const std::function<double(double)>& df, double rel_tol) const {
    double o[3];
    value3(x, f, df, o, rel_tol);
    double acc = -f(x);
    for (unsigned j = 0; j <= op.n; ++j) acc += rf_at(op.a[j], x) * o[j];
    return acc;
}

double SeriesGreen::antiderivative(double x, double rho0, const std::function<double(double)>& f,
                                   double rel_tol) const {
    if (x == rho0) return 0;
    double inner = std::max(rel_tol * 1e-2, 1e-13);
    double C1 = series_c1(*this, f, inner);
    auto phi = [&](double t) { return series_value_c1(*this, t, f, C1, inner); };
    double I = integrate(phi, std::min(x, rho0), std::max(x, rho0), rel_tol);
    return x >= rho0 ? -I : I;
}

// ---------------------------------------------------------------------------
// solve driver

SolveResult solve_problem(const ProblemSpec& spec) {
    SolveResult r;
    r.scaled = spec.b == 1 ? spec : scale_domain(spec, spec.b);
    long trunc = r.scaled.truncation;

    r.op = make_fuchsian(r.scaled.coeffs);
    FundamentalSystem fs0 = fundamental_system(r.op, trunc);
    r.cs = canonical_functionals(fs0);

    BoundarySpace sp = build_boundary_space(r.cs);
    std::vector<BoundaryFunctional> imposed;
    auto impose = [&](const BoundaryFunctional& fn) {
        auto [ns, out] = trade_or_annex(sp, fn, r.cs.fs);
        sp = std::move(ns);
        r.steps.push_back({fn.to_string(), out.kind, out.index, out.accessible_shrunk});
        imposed.push_back(fn);
    };

    bool want_regularized = false;
    for (const auto& c : r.scaled.conditions) {
        if (c.regularized_origin)
            want_regularized = true;
        else
            impose(c.fn);
    }
    if (want_regularized) {
        // the curbing families, expanded through exponent zero, ascending
        std::vector<std::pair<Rational, BoundaryFunctional>> fam;
        for (const auto& cf : sp.curbing)
            for (long k = cf.k_mu; Rational(k) + cf.mu <= 0; ++k)
                fam.emplace_back(Rational(k) + cf.mu, BoundaryFunctional::coefficient(k, cf.mu));
        std::sort(fam.begin(), fam.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [e, fn] : fam) {
            if (std::find(imposed.begin(), imposed.end(), fn) != imposed.end())
                continue; // already imposed explicitly
            impose(fn);
        }
    }
    r.space = sp;

    AdmissibleSpaceRepr repr = admissible_space(r.op, sp, r.cs.fs, trunc);
    std::vector<BoundaryFunctional> block(sp.finite_part.begin(),
                                          sp.finite_part.begin() + sp.regular_count);
    AdmissibleProjector P = admissible_projector(repr, r.cs.fs, block);
    r.Q = accessible_projector(r.op, std::move(P), r.cs.fs, trunc);

    bool exact_data = r.op.exact_coefficients();
    for (const auto& u : r.cs.fs.u) exact_data = exact_data && u.is_exact();
    if (exact_data) {
        r.exceptional = exceptional_space(r.Q, trunc);
        try {
            r.G = greens_operator(r.op, sp, r.cs.fs, trunc);
            try {
                r.kernel = extract_greens_function(*r.G);
            } catch (const DistributionalKernel&) {
                // identity-like terms have no integral kernel; G still works
            }
        } catch (const ExactnessLost&) {
        }
    }

    if (!r.G && r.op.n == 2 && sp.regular_count == 2 && !r.cs.betas.empty() &&
        sp.finite_part[0] == r.cs.betas[0] &&
        sp.finite_part[1] == BoundaryFunctional::point_eval(Rational(1))) {
        r.series = build_series_green(r.op, r.cs, trunc);
    }
    return r;
}

namespace {

const char* impose_kind_name(ImposeKind k) {
    switch (k) {
    case ImposeKind::Traded: return "traded";
    case ImposeKind::Annexed: return "annexed";
    case ImposeKind::RedundantCurbing: return "redundant-curbing";
    }
    return "?";
}

} // namespace

std::string solve_result_to_json(const SolveResult& r) {
    json j;
    j["greens_operator"] = r.G ? json::parse(operator_to_json(*r.G)) : json(nullptr);
    j["greens_function"] = r.kernel ? json::parse(greens_function_to_json(*r.kernel)) : json(nullptr);

    json rep;
    rep["problem"] = json::parse(problem_to_json(r.scaled));
    rep["indicial_roots"] = json::array();
    for (const Rational& rt : r.cs.fs.roots) rep["indicial_roots"].push_back(rat_to_string(rt));

    json canon;
    canon["betas"] = json::array();
    for (const auto& b : r.cs.betas) canon["betas"].push_back(json::parse(boundary_functional_to_json(b)));
    canon["E"] = json::array();
    for (size_t i = 0; i < r.cs.E.rows; ++i) {
        json row = json::array();
        for (size_t k = 0; k < r.cs.E.cols; ++k) row.push_back(rat_to_string(r.cs.E.at(i, k)));
        canon["E"].push_back(row);
    }
    rep["canonical"] = canon;

    rep["imposition"] = json::array();
    for (const auto& st : r.steps) {
        json s;
        s["condition"] = st.condition;
        s["outcome"] = impose_kind_name(st.kind);
        if (st.kind == ImposeKind::Traded) s["slot"] = st.slot;
        if (st.accessible_shrunk) s["accessible_shrunk"] = true;
        rep["imposition"].push_back(s);
    }
    rep["space"] = json::parse(boundary_space_to_json(r.space));
    rep["admissible"] = json::parse(admissible_space_to_json(r.Q.P.repr));
    rep["accessible_closed_form"] =
        r.Q.analytic_form ? json::parse(operator_to_json(*r.Q.analytic_form)) : json(nullptr);
    rep["exceptional"] = r.exceptional ? json::parse(exceptional_to_json(*r.exceptional))
                                       : json(nullptr);
    rep["series_fallback"] = r.series.has_value();
    j["report"] = rep;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// forcing fixtures

const std::vector<ForcingFixture>& forcing_fixtures() {
    static const std::vector<ForcingFixture> table = {
        {"graded-plate-load", "(x+1)/(x*(x-1)^2)", {{0.45, -1.9555518514312398}}},
    };
    return table;
}

std::string resolve_forcing(const std::string& text) {
    for (const auto& fx : forcing_fixtures())
        if (fx.name == text) return fx.expr;
    return text;
}

// ---------------------------------------------------------------------------
// eval

std::string cmd_eval(const ProblemSpec& spec, const std::string& forcing, const EvalOptions& opt) {
    if (opt.grid < 1) throw ParseError("--grid must be at least 1");
    SolveResult r = solve_problem(spec);
    Expr e = parse_expression(resolve_forcing(forcing));

    std::ostringstream csv;
    csv << "x,u\n";
    long m = opt.grid + 1;

    if (r.exact() && !opt.quadrature) {
        GenLaurentPoly f;
        try {
            f = expr_to_laurent_poly(e);
        } catch (const ParseError& err) {
            throw ParseError(std::string("exact evaluation needs a Laurent-polynomial forcing (") +
                             err.what() + "); use quadrature mode for general expressions");
        }
        require_analytic(f);
        GenLaurentElement fe = GenLaurentElement::from_laurent_poly(scale_laurent(f, spec.b));
        GenLaurentElement u = apply_to_series(*r.G, fe);
        for (long i = 1; i <= opt.grid; ++i) {
            Rational xs = Rational(i) / m;
            Rational val;
            try {
                val = evaluate_partial(u, xs).value;
            } catch (const ExactnessLost& err) {
                throw ParseError(std::string("exact evaluation hit an irrational power value (") +
                                 err.what() + "); use quadrature mode");
            }
            csv << rat_to_decimal(spec.b * xs) << "," << rat_to_decimal(val) << "\n";
        }
    } else if (r.exact()) {
        if (!r.kernel)
            throw std::runtime_error("the Green's operator has non-integral terms, so there is "
                                     "no kernel to integrate numerically; use exact mode");
        bool laurent = true;
        GenLaurentPoly fp;
        try {
            fp = expr_to_laurent_poly(e);
        } catch (const ParseError&) {
            laurent = false;
        }
        if (laurent) {
            require_analytic(fp);
        } else {
            RationalFunction rf = expr_to_rational_function(e);
            if (rf.den.eval(Rational(0)) == 0 ||
                count_real_roots(rf.den, Rational(0), Rational(1)) > 0)
                throw ParseError("the forcing has a pole on the closed interval; the kernel "
                                 "integral does not converge");
        }
        ForcingDouble fd = make_forcing_double(e, spec.b);
        const GreensFunction& g = *r.kernel;
        std::vector<double> bps;
        for (const Rational& bp : g.breakpoints) bps.push_back(rat_to_double(bp));
        for (long i = 1; i <= opt.grid; ++i) {
            double xs = static_cast<double>(i) / static_cast<double>(m);
            std::vector<double> cuts = bps;
            cuts.push_back(xs);
            double u = integrate_cells([&](double xi) { return g.eval_double(xs, xi) * fd.f(xi); },
                                       0.0, 1.0, cuts, opt.rel_tol);
            csv << rat_to_decimal(spec.b * Rational(i) / m) << "," << dbl15(u) << "\n";
        }
    } else if (r.series) {
        ForcingDouble fd = make_forcing_double(e, spec.b);
        double C1 = series_c1(*r.series, fd.f, opt.rel_tol);
        for (long i = 1; i <= opt.grid; ++i) {
            double xs = static_cast<double>(i) / static_cast<double>(m);
            double u = series_value_c1(*r.series, xs, fd.f, C1, opt.rel_tol);
            csv << rat_to_decimal(spec.b * Rational(i) / m) << "," << dbl15(u) << "\n";
        }
    } else {
        throw std::runtime_error("no evaluator available: the problem has neither exact "
                                 "fundamental data nor the order-2 series fallback shape");
    }
    return csv.str();
}

// ---------------------------------------------------------------------------
// verify

std::string cmd_verify(const ProblemSpec& spec, const std::string& forcing) {
    SolveResult r = solve_problem(spec);
    std::string expr_text = resolve_forcing(forcing);
    Expr e = parse_expression(expr_text);
    const ForcingFixture* fx = nullptr;
    for (const auto& f : forcing_fixtures())
        if (f.name == forcing) fx = &f;

    json rep;
    rep["forcing"] = expr_text;
    rep["checks"] = json::array();
    auto record = [&rep](const std::string& name, const std::string& value) {
        json c;
        c["name"] = name;
        c["value"] = value;
        c["ok"] = true;
        rep["checks"].push_back(c);
    };

    if (r.exact()) {
        rep["mode"] = "exact";
        GenLaurentPoly f;
        try {
            f = expr_to_laurent_poly(e);
        } catch (const ParseError& err) {
            throw ParseError(std::string("verification on exact problems needs a "
                                         "Laurent-polynomial forcing (") + err.what() + ")");
        }
        require_analytic(f);
        GenLaurentElement fe = GenLaurentElement::from_laurent_poly(scale_laurent(f, spec.b));
        GenLaurentElement u = apply_to_series(*r.G, fe);

        GenLaurentElement lhs = apply_operator(r.op, u);
        GenLaurentElement rhs = r.Q.analytic_form ? apply_to_series(*r.Q.analytic_form, fe)
                                                  : r.Q.apply(fe);
        bool ok = lhs.is_exact() && rhs.is_exact() ? element_equal(lhs, rhs)
                                                   : element_equal_window(lhs, rhs);
        if (!ok)
            throw VerificationFailed("T(Gf) = Qf fails: (T G - Q)f = " +
                                     element_sub(lhs, rhs).to_string());
        record("T(Gf) = Qf", "exact");

        for (const auto& beta : r.space.finite_part) {
            Rational val = apply_functional(beta, u);
            if (val != 0)
                throw VerificationFailed("condition " + beta.to_string() +
                                         " fails on Gf: value " + rat_to_string(val));
            record(beta.to_string() + " (Gf) = 0", "exact");
        }

        for (const auto& cf : r.space.curbing) {
            auto it = u.comp.find(cf.mu);
            if (it == u.comp.end()) continue;
            const GenLaurentSeries& sc = it->second;
            long hi = std::min(cf.k_mu, sc.top ? *sc.top : sc.N + static_cast<long>(sc.a.size()));
            for (long k = sc.N; k < hi; ++k)
                if (sc.coeff(k) != 0)
                    throw VerificationFailed(
                        "Gf has a pole below the curbing bound: coefficient of x^" +
                        rat_to_string(Rational(k) + cf.mu) + " is " + rat_to_string(sc.coeff(k)));
            record("no poles below the curbing bound (class " + rat_to_string(cf.mu) + ")",
                   "exact");
        }
    } else if (r.series) {
        rep["mode"] = "series";
        ForcingDouble fd = make_forcing_double(e, spec.b);
        const SeriesGreen& sg = *r.series;

        double scale = std::max(1.0, std::fabs(sg.value(0.5, fd.f)));
        double maxres = 0;
        for (int i = 1; i <= 21; ++i) {
            double x = i / 22.0;
            maxres = std::max(maxres, std::fabs(sg.residual(x, fd.f, fd.df)));
        }
        if (maxres > 1e-6 * scale)
            throw VerificationFailed("series residual: max |T(u) - f| = " + dbl15(maxres) +
                                     " on the 21-point grid exceeds 1e-6");
        record("max |T(u) - f| on 21 interior points", dbl15(maxres));

        double edge = std::fabs(sg.value(1.0, fd.f));
        if (edge > 1e-6 * scale)
            throw VerificationFailed("edge condition: |u(1)| = " + dbl15(edge));
        record("|u(1)|", dbl15(edge));

        // h(x) = x*u(x) tends to the residue coefficient; 2h(x0) - h(2x0)
        // cancels the regular part to first order, so a genuine pole shows at
        // its full size while clean solutions leave O(x0^2)
        double x0 = 1.0 / 32;
        double h1 = x0 * sg.value(x0, fd.f);
        double h2 = 2 * x0 * sg.value(2 * x0, fd.f);
        double pole_probe = std::fabs(2 * h1 - h2);
        if (pole_probe > 0.01 * scale)
            throw VerificationFailed("pole probe near 0: residue estimate |2h(1/32) - h(1/16)| = " +
                                     dbl15(pole_probe) + " with h(x) = x*u(x)");
        record("residue estimate near 0 (pole probe)", dbl15(pole_probe));

        if (fx) {
            double bd = rat_to_double(spec.b);
            for (const auto& [xr, want] : fx->reference) {
                double got = sg.value(xr / bd, fd.f);
                double rel = std::fabs(got - want) / std::max(std::fabs(want), 1e-30);
                if (rel > 1e-6)
                    throw VerificationFailed("reference value u(" + dbl15(xr) + ") = " +
                                             dbl15(got) + ", expected " + dbl15(want) +
                                             " (rel " + dbl15(rel) + ")");
                record("u(" + dbl15(xr) + ") vs reference " + dbl15(want), dbl15(rel));
            }
        }
    } else {
        throw std::runtime_error("no verifier available for this problem's shape");
    }

    rep["verified"] = true;
    return rep.dump(2);
}

std::string cmd_solve(const ProblemSpec& spec) { return solve_result_to_json(solve_problem(spec)); }

// ---------------------------------------------------------------------------
// tapered-plate preset

RationalFunction load_to_forcing(const KirchhoffConfig& cfg) {
    RationalFunction q;
    if (cfg.constant_load) {
        q = RationalFunction{Poly(cfg.q0), Poly(Rational(1))};
    } else {
        q = expr_to_rational_function(parse_expression(cfg.load_expr));
    }
    RationalFunction gx = q * RationalFunction{Poly::x(), Poly(Rational(1))};
    auto [quot, rem] = poly_divmod(gx.num, gx.den);
    if (!rem.is_zero())
        throw LogObstruction("the cumulative load integral of q(s)*s leaves the "
                             "rational-function field");
    std::vector<Rational> ic(quot.c.size() + 1, Rational(0));
    for (size_t i = 0; i < quot.c.size(); ++i) ic[i + 1] = quot.c[i] / Rational(i + 1);
    // I(x) = int_0^x q s ds has no constant term, so I(x)/x stays polynomial
    std::vector<Rational> iox(ic.begin() + 1, ic.end());
    Rational D0 = cfg.E0 * rat_pow(cfg.t0, 3) / (Rational(12) * (1 - cfg.nu * cfg.nu));
    Poly one_minus_x{std::vector<Rational>{Rational(1), Rational(-1)}};
    RationalFunction f{Poly{iox} * (-rat_pow(cfg.b, 3) / D0), one_minus_x.pow(3)};
    f.reduce();
    return f;
}

std::pair<ProblemSpec, RationalFunction> kirchhoff_preset(const KirchhoffConfig& cfg) {
    if (cfg.beta <= 0 || cfg.beta >= 1)
        throw std::invalid_argument("kirchhoff: beta must lie in (0,1); the taper t0*(1-x) "
                                    "pinches the plate off at x = 1");
    if (cfg.nu < 0 || cfg.nu >= Rational(1) / 2)
        throw std::invalid_argument("kirchhoff: the Poisson ratio nu must lie in [0, 1/2)");
    if (cfg.t0 <= 0 || cfg.E0 <= 0 || cfg.b <= 0)
        throw std::invalid_argument("kirchhoff: t0, E0 and b must be positive");
    if (cfg.truncation < 4) throw std::invalid_argument("kirchhoff: truncation too small");

    std::string nus = rat_to_string(cfg.nu);
    ProblemSpec spec;
    spec.coeff_text = {"-((1-x)+3*(" + nus + ")*x)/(x*(1-x))", "(1-4*x)/(1-x)", "x"};
    for (const auto& s : spec.coeff_text)
        spec.coeffs.push_back(expr_to_rational_function(parse_expression(s)));
    spec.b = cfg.beta;
    spec.truncation = cfg.truncation;

    ConditionSpec edge;
    edge.fn = BoundaryFunctional::point_eval(cfg.beta);
    ConditionSpec reg;
    reg.regularized_origin = true;
    spec.conditions = {edge, reg};

    RationalFunction f = load_to_forcing(cfg);
    RationalFunction rhs = RationalFunction{Poly::x(), Poly(Rational(1))} * f;
    return {spec, rhs};
}

} // namespace greenbp
