#include "greenbp/fuchsian.hpp"

#include <algorithm>
#include <sstream>

namespace greenbp {

namespace {

// index of the first nonzero coefficient (order of vanishing at 0)
long ord0(const Poly& p) {
    for (size_t i = 0; i < p.c.size(); ++i)
        if (p.c[i] != 0) return static_cast<long>(i);
    return -1; // zero polynomial
}

// product (X - 0)(X - 1)...(X - (j-1)), the falling-factorial polynomial
Poly falling_factorial_poly(unsigned j) {
    Poly r(Rational(1));
    for (unsigned t = 0; t < j; ++t) {
        Poly lin(std::vector<Rational>{Rational(t) * Rational(-1), Rational(1)});
        r *= lin;
    }
    return r;
}

} // namespace

GenLaurentPoly rational_function_to_laurent(const RationalFunction& rf) {
    if (rf.num.is_zero()) return {};
    long v = ord0(rf.den);
    for (size_t i = 0; i < rf.den.c.size(); ++i)
        if (rf.den.c[i] != 0 && static_cast<long>(i) != v)
            throw ExactnessLost("denominator " + rf.den.to_string() +
                                " is not a monomial; no finite Laurent form");
    Rational c = rf.den.c[static_cast<size_t>(v)];
    GenLaurentPoly g;
    for (size_t i = 0; i < rf.num.c.size(); ++i)
        if (rf.num.c[i] != 0) g.t[Rational(static_cast<long>(i) - v)] = rf.num.c[i] / c;
    return g;
}

FuchsianOperator make_fuchsian(std::vector<RationalFunction> coeffs) {
    if (coeffs.size() < 2)
        throw NotFuchsian("need order >= 1 (got " + std::to_string(coeffs.size()) +
                          " coefficients)");
    FuchsianOperator op;
    op.n = static_cast<unsigned>(coeffs.size()) - 1;
    for (auto& c : coeffs) c.reduce();
    op.a = std::move(coeffs);

    const RationalFunction& an = op.a[op.n];
    if (an.is_zero()) throw NotFuchsian("leading coefficient is identically zero");
    if (count_real_roots(an.num, 0, 1) > 0)
        throw NotFuchsian("leading coefficient vanishes somewhere on (0,1]");
    for (unsigned j = 0; j <= op.n; ++j)
        if (count_real_roots(op.a[j].den, 0, 1) > 0)
            throw NotFuchsian("coefficient of D^" + std::to_string(j) +
                              " has a pole on (0,1]");

    for (unsigned j = 0; j <= op.n; ++j) {
        RationalFunction pj = op.a[j] / an;
        if (!pj.is_zero()) {
            long o = ord0(pj.num) - ord0(pj.den);
            if (o < static_cast<long>(j) - static_cast<long>(op.n))
                throw NotFuchsian("coefficient ratio a_" + std::to_string(j) +
                                  "/a_n has a pole of order > " +
                                  std::to_string(op.n - j) +
                                  " at 0; the singularity is irregular");
        }
        op.p.push_back(std::move(pj));
    }
    return op;
}

GenLaurentElement FuchsianOperator::coefficient_expansion(unsigned j, long upto) const {
    RationalFunction cj = p[j];
    cj.num = cj.num * Poly::monomial(1, n - j); // x^{n-j} p_j, regular at 0
    cj.reduce();
    return laurent_expand(cj, upto);
}

bool FuchsianOperator::exact_coefficients() const {
    for (unsigned j = 0; j <= n; ++j) {
        RationalFunction cj = p[j];
        if (cj.is_zero()) continue;
        cj.num = cj.num * Poly::monomial(1, n - j);
        cj.reduce();
        long v = ord0(cj.den);
        for (size_t i = 0; i < cj.den.c.size(); ++i)
            if (cj.den.c[i] != 0 && static_cast<long>(i) != v) return false;
    }
    return true;
}

long FuchsianOperator::certificate_degree() const {
    long d = 0;
    for (unsigned j = 0; j <= n; ++j) {
        // exact expansions only (caller checks exact_coefficients first)
        GenLaurentElement full = coefficient_expansion(j, 1);
        if (!full.is_exact()) continue;
        GenLaurentPoly g = full.to_laurent_poly();
        if (!g.is_zero()) d = std::max(d, rat_to_long(g.t.rbegin()->first));
    }
    return d;
}

IndicialData indicial_data(const FuchsianOperator& op) {
    IndicialData id;
    Poly ip;
    for (unsigned j = 0; j <= op.n; ++j) {
        // q_j = (x^{n-j} a_j/a_n)(0), read off the orders of vanishing
        const RationalFunction& pj = op.p[j];
        if (pj.is_zero()) continue;
        long o = ord0(pj.num) - ord0(pj.den) + static_cast<long>(op.n) - static_cast<long>(j);
        if (o > 0) continue;
        Rational qj = pj.num.c[static_cast<size_t>(ord0(pj.num))] /
                      pj.den.c[static_cast<size_t>(ord0(pj.den))];
        ip += falling_factorial_poly(j) * Poly(qj);
    }
    id.indicial = ip;

    RationalRoots rr = rational_roots(ip);
    long found = 0;
    for (const auto& [root, mult] : rr.roots) found += mult;
    if (found != ip.degree()) {
        std::ostringstream os;
        os << "indicial polynomial " << ip.to_string("s")
           << " does not split over Q (unresolved factor " << rr.cofactor.to_string("s") << ")";
        throw IrrationalIndicialRoots(os.str());
    }
    for (const auto& [root, mult] : rr.roots)
        for (int i = 0; i < mult; ++i) id.roots.push_back(root);
    std::sort(id.roots.begin(), id.roots.end());

    for (const auto& r : id.roots) {
        Rational f = rat_frac(r);
        if (std::find(id.mu_classes.begin(), id.mu_classes.end(), f) == id.mu_classes.end())
            id.mu_classes.push_back(f);
    }
    std::sort(id.mu_classes.begin(), id.mu_classes.end());
    return id;
}

GenLaurentElement frobenius_solution(const FuchsianOperator& op, const Rational& lambda,
                                     long trunc) {
    if (trunc < 1) trunc = 1;
    IndicialData id = indicial_data(op);
    if (id.indicial.eval(lambda) != 0)
        throw std::domain_error("frobenius_solution: " + rat_to_string(lambda) +
                                " is not an indicial root");
    if (id.indicial.derivative().eval(lambda) == 0)
        throw ResonantObstruction("repeated indicial root; witness (" + rat_to_string(lambda) +
                                  ", " + rat_to_string(lambda) + ")");

    // any larger root at integer distance is a potential obstruction: the
    // recursion must be run through that index whatever the window is
    long horizon = trunc;
    for (const auto& r : id.roots) {
        Rational gap = r - lambda;
        if (gap > 0 && rat_is_integer(gap)) horizon = std::max(horizon, rat_to_long(gap));
    }

    std::vector<GenLaurentElement> cexp;
    for (unsigned j = 0; j <= op.n; ++j) cexp.push_back(op.coefficient_expansion(j, horizon));

    // g_m(s) = sum_j c_{j,m} s(s-1)...(s-j+1)
    auto g = [&](long m, const Rational& s) {
        Rational v = 0;
        for (unsigned j = 0; j <= op.n; ++j)
            v += coeff_extract(cexp[j], m, 0) * falling_factorial(s, j);
        return v;
    };

    std::vector<Rational> coef(static_cast<size_t>(horizon) + 1, Rational(0));
    coef[0] = 1;
    for (long K = 1; K <= horizon; ++K) {
        Rational rhs = 0;
        for (long k = 0; k < K; ++k) {
            if (coef[static_cast<size_t>(k)] == 0) continue;
            rhs -= coef[static_cast<size_t>(k)] * g(K - k, lambda + k);
        }
        Rational lhs = id.indicial.eval(lambda + K);
        if (lhs == 0) {
            if (rhs != 0)
                throw ResonantObstruction(
                    "resonant index " + std::to_string(K) + " with nonzero source; witness (" +
                    rat_to_string(lambda) + ", " + rat_to_string(lambda + K) + ")");
            coef[static_cast<size_t>(K)] = 0; // canonical choice
        } else {
            coef[static_cast<size_t>(K)] = rhs / lhs;
        }
    }

    // exactness certificate: polynomial coefficient data of degree d plus a
    // run of d zero coefficients means everything later vanishes too
    bool exact = false;
    if (op.exact_coefficients()) {
        long d = std::max<long>(1, op.certificate_degree());
        long last = 0;
        for (long k = 0; k <= horizon; ++k)
            if (coef[static_cast<size_t>(k)] != 0) last = k;
        if (horizon - last >= d) exact = true;
    }

    GenLaurentSeries s;
    s.mu = rat_frac(lambda);
    s.N = rat_floor(lambda);
    if (exact) {
        long last = 0;
        for (long k = 0; k <= horizon; ++k)
            if (coef[static_cast<size_t>(k)] != 0) last = k;
        s.a.assign(coef.begin(), coef.begin() + last + 1);
        s.top.reset();
    } else {
        long keep = std::min(horizon, trunc);
        s.a.assign(coef.begin(), coef.begin() + keep + 1);
        s.top = s.N + keep + 1;
        std::optional<Rational> rad;
        for (const auto& ce : cexp) {
            auto r = ce.min_radius();
            if (r && (!rad || *r < *rad)) rad = r;
        }
        s.radius = rad;
    }
    GenLaurentElement u;
    u.comp[s.mu] = std::move(s);
    u.normalize();
    return u;
}

GenLaurentElement element_det(const std::vector<std::vector<GenLaurentElement>>& m) {
    size_t n = m.size();
    if (n == 0) return GenLaurentElement::monomial(1, 0);
    if (n == 1) return m[0][0];
    GenLaurentElement det = GenLaurentElement::zero();
    for (size_t c = 0; c < n; ++c) {
        std::vector<std::vector<GenLaurentElement>> minor;
        for (size_t r = 1; r < n; ++r) {
            std::vector<GenLaurentElement> row;
            for (size_t cc = 0; cc < n; ++cc)
                if (cc != c) row.push_back(m[r][cc]);
            minor.push_back(std::move(row));
        }
        GenLaurentElement term = element_mul(m[0][c], element_det(minor));
        det = (c % 2 == 0) ? det + term : det - term;
    }
    return det;
}

FundamentalSystem fundamental_system(const FuchsianOperator& op, long trunc) {
    IndicialData id = indicial_data(op);
    FundamentalSystem fs;
    fs.roots = id.roots;
    for (const auto& r : fs.roots) fs.u.push_back(frobenius_solution(op, r, trunc));

    std::vector<std::vector<GenLaurentElement>> m;
    for (unsigned r = 0; r < op.n; ++r) {
        std::vector<GenLaurentElement> row;
        for (unsigned i = 0; i < op.n; ++i)
            row.push_back(differentiate(fs.u[i], static_cast<int>(r)));
        m.push_back(std::move(row));
    }
    fs.W = element_det(m);
    if (fs.W.is_zero())
        throw WronskianDegenerate("Wronskian of the constructed system has no known nonzero term");
    return fs;
}

GenLaurentElement apply_operator(const FuchsianOperator& op, const GenLaurentElement& u,
                                 bool normalized) {
    long kmax = 0, nmin = 0;
    for (const auto& [mu, s] : u.comp) {
        long hi = s.top ? *s.top - 1 : s.N + static_cast<long>(s.a.size()) - 1;
        kmax = std::max(kmax, hi);
        nmin = std::min(nmin, s.N);
    }
    long upto = kmax - nmin + static_cast<long>(op.n) + 4;

    GenLaurentElement r = GenLaurentElement::zero();
    for (unsigned j = 0; j <= op.n; ++j) {
        const RationalFunction& cj = normalized ? op.p[j] : op.a[j];
        if (cj.is_zero()) continue;
        r = r + element_mul(laurent_expand(cj, upto), differentiate(u, static_cast<int>(j)));
    }
    r.normalize();
    return r;
}

std::vector<GenLaurentElement> variation_tails(const FuchsianOperator& op,
                                               const FundamentalSystem& fs,
                                               const Rational& upto) {
    const unsigned n = op.n;
    GenLaurentElement den =
        element_mul(fs.W, laurent_expand(op.a[n], rat_floor(upto) + 2 * static_cast<long>(n) + 8));
    std::vector<GenLaurentElement> tails;
    for (unsigned i = 0; i < n; ++i) {
        std::vector<std::vector<GenLaurentElement>> minor;
        for (unsigned r = 0; r + 1 < n; ++r) {
            std::vector<GenLaurentElement> row;
            for (unsigned c = 0; c < n; ++c)
                if (c != i) row.push_back(differentiate(fs.u[c], static_cast<int>(r)));
            minor.push_back(std::move(row));
        }
        GenLaurentElement d = element_det(minor);
        if ((n - 1 + i) % 2 == 1) d = -d;
        tails.push_back(element_div(d, den, upto));
    }
    return tails;
}

IntDiffOperator fundamental_right_inverse(const FuchsianOperator& op,
                                          const FundamentalSystem& fs) {
    for (const auto& u : fs.u)
        if (!u.is_exact())
            throw ExactnessLost("right inverse as a finitary operator needs an exact "
                                "fundamental system");
    std::vector<GenLaurentElement> tails = variation_tails(op, fs, 16);
    IntDiffOperator T;
    for (unsigned i = 0; i < op.n; ++i) {
        if (!tails[i].is_exact())
            throw ExactnessLost("variation-of-constants tail t_" + std::to_string(i + 1) +
                                " is not a finite Laurent polynomial");
        T.integral.push_back({fs.u[i].to_laurent_poly(), tails[i].to_laurent_poly()});
    }
    return normalize(T);
}

LogElement apply_operator_log(const FuchsianOperator& op, const LogElement& u,
                              bool normalized) {
    long kmax = 0, nmin = 0;
    for (const GenLaurentElement* part : {&u.base, &u.logpart})
        for (const auto& [mu, s] : part->comp) {
            long hi = s.top ? *s.top - 1 : s.N + static_cast<long>(s.a.size()) - 1;
            kmax = std::max(kmax, hi);
            nmin = std::min(nmin, s.N);
        }
    long upto = kmax - nmin + static_cast<long>(op.n) + 4;

    LogElement r{GenLaurentElement::zero(), GenLaurentElement::zero()};
    for (unsigned j = 0; j <= op.n; ++j) {
        const RationalFunction& cj = normalized ? op.p[j] : op.a[j];
        if (cj.is_zero()) continue;
        LogElement d = u;
        for (unsigned t = 0; t < j; ++t) d = log_differentiate(d);
        r = log_add(r, log_mul_element(d, laurent_expand(cj, upto)));
    }
    r.base.normalize();
    r.logpart.normalize();
    return r;
}

LogElement apply_right_inverse_log(const FundamentalSystem& fs,
                                   const std::vector<GenLaurentElement>& tails,
                                   const GenLaurentElement& f) {
    LogElement acc{GenLaurentElement::zero(), GenLaurentElement::zero()};
    for (size_t i = 0; i < fs.u.size(); ++i) {
        LogElement Ai = log_integrate_rb({element_mul(tails[i], f), GenLaurentElement::zero()});
        acc = log_add(acc, log_mul_element(Ai, fs.u[i]));
    }
    return acc;
}

IntDiffOperator operator_as_intdiff(const FuchsianOperator& op, bool normalized) {
    IntDiffOperator T;
    for (unsigned j = 0; j <= op.n; ++j) {
        const RationalFunction& cj = normalized ? op.p[j] : op.a[j];
        if (cj.is_zero()) continue;
        T.diff.push_back({rational_function_to_laurent(cj), j});
    }
    return normalize(T);
}

} // namespace greenbp
