#include "greenbp/opring.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace greenbp {

namespace {

using json = nlohmann::json;

// ---- exact powers ---------------------------------------------------------

// floor of the q-th root of a nonnegative integer, by bisection
Int int_root_floor(const Int& n, unsigned long q) {
    if (n <= 1) return n;
    Int lo = 0, hi = n;
    while (lo < hi) {
        Int mid = (lo + hi + 1) / 2;
        Int p = 1;
        bool over = false;
        for (unsigned long i = 0; i < q; ++i) {
            p *= mid;
            if (p > n) { over = true; break; }
        }
        if (over) hi = mid - 1; else lo = mid;
    }
    return lo;
}

// x^e for rational e, exact or ExactnessLost.  x > 0.
Rational exact_rational_pow(const Rational& x, const Rational& e) {
    if (x == 1 || e == 0) return 1;
    long p = rat_to_long(Rational(numer(e)));
    unsigned long q = static_cast<unsigned long>(rat_to_long(Rational(denom(e))));
    Rational based = rat_pow(x, p); // x^p
    if (q == 1) return based;
    Int bn = numer(based), bd = denom(based);
    Int rn = int_root_floor(bn, q), rd = int_root_floor(bd, q);
    Int cn = 1, cd = 1;
    for (unsigned long i = 0; i < q; ++i) { cn *= rn; cd *= rd; }
    if (cn != bn || cd != bd)
        throw ExactnessLost("no exact rational value for " + rat_to_string(x) + "^" +
                            rat_to_string(e));
    return Rational(rn) / Rational(rd);
}

Rational binom(unsigned n, unsigned k) {
    if (k > n) return 0;
    Rational r = 1;
    for (unsigned i = 0; i < k; ++i) r = r * Rational(n - i) / Rational(i + 1);
    return r;
}

// split a rational exponent into integer index + fractional class
std::pair<long, Rational> split_exponent(const Rational& e) {
    return {rat_floor(e), rat_frac(e)};
}

GenLaurentPoly glp_one() { return GenLaurentPoly::constant(1); }

bool glp_less(const GenLaurentPoly& a, const GenLaurentPoly& b) { return a.t < b.t; }

} // namespace

// ---- small Laurent-poly calculus ------------------------------------------

GenLaurentPoly laurent_poly_integral(const GenLaurentPoly& w) {
    GenLaurentPoly F;
    Rational at_one = 0;
    for (const auto& [e, c] : w.t) {
        if (e == -1)
            throw LogObstruction("residue term " + rat_to_string(c) +
                                 "*x^-1 has no Laurent antiderivative");
        F.t[e + 1] = c / (e + 1);
        at_one += c / (e + 1);
    }
    if (at_one != 0) {
        auto it = F.t.find(0);
        Rational v = (it == F.t.end() ? Rational(0) : it->second) - at_one;
        if (v == 0) { if (it != F.t.end()) F.t.erase(it); }
        else F.t[0] = v;
    }
    return F;
}

GenLaurentPoly laurent_poly_derivative(const GenLaurentPoly& w, unsigned times) {
    GenLaurentPoly r = w;
    for (unsigned i = 0; i < times; ++i) {
        GenLaurentPoly d;
        for (const auto& [e, c] : r.t)
            if (e != 0) d.t[e - 1] = c * e;
        r = d;
    }
    return r;
}

Rational laurent_poly_eval(const GenLaurentPoly& w, const Rational& xi) {
    Rational s = 0;
    for (const auto& [e, c] : w.t) s += c * exact_rational_pow(xi, e);
    return s;
}

// ---- Functional ------------------------------------------------------------

Functional Functional::point_eval(const Rational& xi, unsigned j) {
    Functional f;
    f.kind = PointEval;
    f.xi = xi;
    f.deriv = j;
    return f;
}

Functional Functional::coefficient(long k, const Rational& mu) {
    Functional f;
    f.kind = Coeff;
    f.k = k;
    f.mu = mu;
    return f;
}

Functional Functional::def_int(const Rational& lo, const Rational& hi, GenLaurentPoly w) {
    Functional f;
    f.kind = DefInt;
    f.lo = lo;
    f.hi = hi;
    f.weight = std::move(w);
    return f;
}

bool Functional::operator==(const Functional& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
    case PointEval: return xi == o.xi && deriv == o.deriv;
    case Coeff: return k == o.k && mu == o.mu;
    case DefInt: return lo == o.lo && hi == o.hi && weight == o.weight;
    }
    return false;
}

bool Functional::operator<(const Functional& o) const {
    if (kind != o.kind) return kind < o.kind;
    switch (kind) {
    case PointEval:
        if (xi != o.xi) return xi < o.xi;
        return deriv < o.deriv;
    case Coeff:
        if (mu != o.mu) return mu < o.mu;
        return k < o.k;
    case DefInt:
        if (lo != o.lo) return lo < o.lo;
        if (hi != o.hi) return hi < o.hi;
        return glp_less(weight, o.weight);
    }
    return false;
}

std::string Functional::to_string() const {
    std::ostringstream os;
    switch (kind) {
    case PointEval:
        os << "e_{" << rat_to_string(xi) << "}";
        if (deriv > 0) os << ".D^" << deriv;
        break;
    case Coeff:
        os << "c_{" << k;
        if (mu != 0) os << "+" << rat_to_string(mu);
        os << "}";
        break;
    case DefInt:
        if (lo == 0 && hi == 1) os << "F[";
        else os << "Int[" << rat_to_string(lo) << "," << rat_to_string(hi) << "][";
        os << weight.to_string("xi") << "]";
        break;
    }
    return os.str();
}

// ---- IntDiffOperator basics -------------------------------------------------

IntDiffOperator IntDiffOperator::identity() { return multiplication(glp_one()); }

IntDiffOperator IntDiffOperator::multiplication(const GenLaurentPoly& w) {
    IntDiffOperator op;
    if (!w.is_zero()) op.diff.push_back({w, 0});
    return op;
}

IntDiffOperator IntDiffOperator::derivative(unsigned j) {
    IntDiffOperator op;
    op.diff.push_back({glp_one(), j});
    return op;
}

IntDiffOperator IntDiffOperator::integral_from_1() {
    IntDiffOperator op;
    op.integral.push_back({glp_one(), glp_one()});
    return op;
}

IntDiffOperator IntDiffOperator::rank_one(const GenLaurentPoly& left, const Functional& phi) {
    IntDiffOperator op;
    op.bdry.push_back({left, phi, false, glp_one()});
    return op;
}

IntDiffOperator operator+(const IntDiffOperator& a, const IntDiffOperator& b) {
    IntDiffOperator r = a;
    r.diff.insert(r.diff.end(), b.diff.begin(), b.diff.end());
    r.integral.insert(r.integral.end(), b.integral.begin(), b.integral.end());
    r.bdry.insert(r.bdry.end(), b.bdry.begin(), b.bdry.end());
    return r;
}

IntDiffOperator operator-(const IntDiffOperator& a, const IntDiffOperator& b) {
    return a + b.scaled(-1);
}

IntDiffOperator IntDiffOperator::scaled(const Rational& s) const {
    IntDiffOperator r;
    if (s == 0) return r;
    for (const auto& t : diff) r.diff.push_back({t.coeff.scaled(s), t.j});
    for (const auto& t : integral) r.integral.push_back({t.left.scaled(s), t.right});
    for (const auto& t : bdry) r.bdry.push_back({t.left.scaled(s), t.phi, t.through_A, t.weight});
    return r;
}

// ---- boundary-term reduction ------------------------------------------------
//
// Brings a single phi ∘ [A] ∘ (mult w) term into the canonical shape where
// through_A is gone and PointEval/Coeff weights are folded into the
// functional.  Every rule is one of:
//   e_xi ∘ A ∘ w          ->  -Int[xi,1][w]            (nothing when xi = 1)
//   e_xi.D^j ∘ A ∘ w      ->  e_xi.D^{j-1} ∘ w
//   c_{k+mu} ∘ A ∘ w      ->  1/(k+mu) c_{k-1+mu} ∘ w  (k+mu != 0)
//   c_0 ∘ A ∘ w           ->  -F[w]
//   e_xi.D^i ∘ w          ->  sum binom(i,m) w^{(i-m)}(xi) e_xi.D^m
//   c_{k+mu} ∘ w          ->  sum_e w_e c_{k+mu-e}
//   Int[lo,hi][v] ∘ w     ->  Int[lo,hi][v w]

namespace {

void reduce_bdry_into(const IntDiffOperator::BdryTerm& term,
                      std::vector<IntDiffOperator::BdryTerm>& out) {
    if (term.left.is_zero()) return;
    const Functional& phi = term.phi;

    if (term.through_A) {
        switch (phi.kind) {
        case Functional::PointEval:
            if (phi.deriv == 0) {
                if (phi.xi == 1) return; // integral from 1 to 1
                reduce_bdry_into({term.left.scaled(-1),
                                  Functional::def_int(phi.xi, 1, term.weight), false, glp_one()},
                                 out);
            } else {
                reduce_bdry_into({term.left, Functional::point_eval(phi.xi, phi.deriv - 1),
                                  false, term.weight},
                                 out);
            }
            return;
        case Functional::Coeff: {
            Rational tau = Rational(phi.k) + phi.mu;
            if (tau == 0) {
                reduce_bdry_into({term.left.scaled(-1),
                                  Functional::def_int(0, 1, term.weight), false, glp_one()},
                                 out);
            } else {
                reduce_bdry_into({term.left.scaled(1 / tau),
                                  Functional::coefficient(phi.k - 1, phi.mu), false, term.weight},
                                 out);
            }
            return;
        }
        case Functional::DefInt:
            throw UnsupportedComposition("definite integral composed with A: " +
                                         phi.to_string() + " ∘ A");
        }
    }

    const bool trivial_weight = (term.weight.t.size() == 1 && term.weight.coeff(0) == 1);
    if (trivial_weight) {
        out.push_back({term.left, phi, false, glp_one()});
        return;
    }

    switch (phi.kind) {
    case Functional::PointEval: {
        for (unsigned m = 0; m <= phi.deriv; ++m) {
            GenLaurentPoly wd = laurent_poly_derivative(term.weight, phi.deriv - m);
            if (wd.is_zero()) continue;
            Rational v = binom(phi.deriv, m) * laurent_poly_eval(wd, phi.xi);
            if (v == 0) continue;
            out.push_back({term.left.scaled(v), Functional::point_eval(phi.xi, m), false,
                           glp_one()});
        }
        return;
    }
    case Functional::Coeff: {
        Rational target = Rational(phi.k) + phi.mu;
        for (const auto& [e, c] : term.weight.t) {
            auto [k2, mu2] = split_exponent(target - e);
            out.push_back({term.left.scaled(c), Functional::coefficient(k2, mu2), false,
                           glp_one()});
        }
        return;
    }
    case Functional::DefInt:
        out.push_back({term.left,
                       Functional::def_int(phi.lo, phi.hi, phi.weight * term.weight), false,
                       glp_one()});
        return;
    }
}

} // namespace

IntDiffOperator normalize(IntDiffOperator op) {
    IntDiffOperator r;

    // differential part: merge by order
    std::map<unsigned, GenLaurentPoly> byj;
    for (auto& t : op.diff)
        if (!t.coeff.is_zero()) byj[t.j] += t.coeff;
    for (auto& [j, c] : byj)
        if (!c.is_zero()) r.diff.push_back({c, j});

    // integral part: scale the right factor monic at its lowest exponent,
    // then merge by right factor
    std::map<std::map<Rational, Rational>, GenLaurentPoly> byright;
    for (auto& t : op.integral) {
        if (t.left.is_zero() || t.right.is_zero()) continue;
        Rational c = t.right.t.begin()->second;
        byright[t.right.scaled(1 / c).t] += t.left.scaled(c);
    }
    for (auto& [w, l] : byright) {
        if (l.is_zero()) continue;
        GenLaurentPoly right;
        right.t = w;
        r.integral.push_back({l, right});
    }

    // boundary part: rule-reduce, canonically scale DefInt weights, merge by
    // functional
    std::vector<IntDiffOperator::BdryTerm> flat;
    for (auto& t : op.bdry) reduce_bdry_into(t, flat);
    std::map<Functional, GenLaurentPoly> byphi;
    for (auto& t : flat) {
        Functional phi = t.phi;
        GenLaurentPoly left = t.left;
        if (phi.kind == Functional::DefInt) {
            if (phi.weight.is_zero() || phi.lo == phi.hi) continue;
            Rational c = phi.weight.t.begin()->second;
            phi.weight = phi.weight.scaled(1 / c);
            left = left.scaled(c);
        }
        byphi[phi] += left;
    }
    for (auto& [phi, l] : byphi)
        if (!l.is_zero()) r.bdry.push_back({l, phi, false, glp_one()});

    return r;
}

bool operator==(const IntDiffOperator& a, const IntDiffOperator& b) {
    auto eq_diff = [](const IntDiffOperator::DiffTerm& x, const IntDiffOperator::DiffTerm& y) {
        return x.j == y.j && x.coeff == y.coeff;
    };
    auto eq_int = [](const IntDiffOperator::IntTerm& x, const IntDiffOperator::IntTerm& y) {
        return x.left == y.left && x.right == y.right;
    };
    auto eq_bdry = [](const IntDiffOperator::BdryTerm& x, const IntDiffOperator::BdryTerm& y) {
        return x.left == y.left && x.phi == y.phi;
    };
    return a.diff.size() == b.diff.size() && a.integral.size() == b.integral.size() &&
           a.bdry.size() == b.bdry.size() &&
           std::equal(a.diff.begin(), a.diff.end(), b.diff.begin(), eq_diff) &&
           std::equal(a.integral.begin(), a.integral.end(), b.integral.begin(), eq_int) &&
           std::equal(a.bdry.begin(), a.bdry.end(), b.bdry.begin(), eq_bdry);
}

// ---- composition ------------------------------------------------------------

namespace {

IntDiffOperator left_multiply(const GenLaurentPoly& c, const IntDiffOperator& op) {
    IntDiffOperator r;
    if (c.is_zero()) return r;
    for (const auto& t : op.diff) r.diff.push_back({c * t.coeff, t.j});
    for (const auto& t : op.integral) r.integral.push_back({c * t.left, t.right});
    for (const auto& t : op.bdry) r.bdry.push_back({c * t.left, t.phi, t.through_A, t.weight});
    return r;
}

// D ∘ op, one derivative pushed through every term
IntDiffOperator differentiate_once(const IntDiffOperator& op) {
    IntDiffOperator r;
    for (const auto& t : op.diff) {
        GenLaurentPoly dc = laurent_poly_derivative(t.coeff);
        if (!dc.is_zero()) r.diff.push_back({dc, t.j});
        r.diff.push_back({t.coeff, t.j + 1});
    }
    for (const auto& t : op.integral) {
        GenLaurentPoly dl = laurent_poly_derivative(t.left);
        if (!dl.is_zero()) r.integral.push_back({dl, t.right});
        r.diff.push_back({t.left * t.right, 0}); // D∘A = 1
    }
    for (const auto& t : op.bdry) {
        GenLaurentPoly dl = laurent_poly_derivative(t.left);
        if (!dl.is_zero()) r.bdry.push_back({dl, t.phi, t.through_A, t.weight});
    }
    return r;
}

IntDiffOperator op_from_diff(const IntDiffOperator::DiffTerm& t) {
    IntDiffOperator op;
    op.diff.push_back(t);
    return op;
}
IntDiffOperator op_from_int(const IntDiffOperator::IntTerm& t) {
    IntDiffOperator op;
    op.integral.push_back(t);
    return op;
}
IntDiffOperator op_from_bdry(const IntDiffOperator::BdryTerm& t) {
    IntDiffOperator op;
    op.bdry.push_back(t);
    return op;
}

// A ∘ (mult g) ∘ D^j by repeated integration by parts:
//   A ∘ g ∘ D^j  =  g·D^{j-1}  -  g(1)·e_1.D^{j-1}  -  A ∘ g' ∘ D^{j-1}
IntDiffOperator int_after_diff(const GenLaurentPoly& g, unsigned j) {
    IntDiffOperator r;
    if (g.is_zero()) return r;
    if (j == 0) {
        r.integral.push_back({glp_one(), g});
        return r;
    }
    r.diff.push_back({g, j - 1});
    Rational g1 = laurent_poly_eval(g, 1);
    if (g1 != 0)
        r.bdry.push_back({GenLaurentPoly::constant(-g1), Functional::point_eval(1, j - 1),
                          false, glp_one()});
    r = r + int_after_diff(laurent_poly_derivative(g), j - 1).scaled(-1);
    return r;
}

Rational apply_functional_to_poly(const Functional& phi, const GenLaurentPoly& h);

// phi ∘ (mult g) ∘ A ∘ (mult z): the remaining first-order patterns
IntDiffOperator functional_weight_int(const Functional& phi, const GenLaurentPoly& g,
                                      const GenLaurentPoly& z) {
    IntDiffOperator r;
    switch (phi.kind) {
    case Functional::PointEval: {
        for (unsigned m = 0; m <= phi.deriv; ++m) {
            GenLaurentPoly gd = laurent_poly_derivative(g, phi.deriv - m);
            if (gd.is_zero()) continue;
            Rational v = binom(phi.deriv, m) * laurent_poly_eval(gd, phi.xi);
            if (v == 0) continue;
            if (m == 0) {
                if (phi.xi != 1)
                    r.bdry.push_back({GenLaurentPoly::constant(-v),
                                      Functional::def_int(phi.xi, 1, z), false, glp_one()});
            } else {
                // e_xi.D^m ∘ A ∘ z = e_xi.D^{m-1} ∘ (mult z)
                r.bdry.push_back({GenLaurentPoly::constant(v),
                                  Functional::point_eval(phi.xi, m - 1), false, z});
            }
        }
        return r;
    }
    case Functional::Coeff: {
        Rational target = Rational(phi.k) + phi.mu;
        for (const auto& [e, c] : g.t) {
            auto [k2, mu2] = split_exponent(target - e);
            r.bdry.push_back({GenLaurentPoly::constant(c),
                              Functional::coefficient(k2, mu2), true, z});
        }
        return r;
    }
    case Functional::DefInt:
        throw UnsupportedComposition("definite integral composed with A: " +
                                     phi.to_string() + " ∘ (mult) ∘ A");
    }
    return r;
}

// phi ∘ (mult V) ∘ D^j with phi a DefInt, by integration by parts; the lo = 0
// endpoint contributes its finite part, the constant coefficient
IntDiffOperator defint_after_diff(const Rational& lo, const Rational& hi,
                                  const GenLaurentPoly& V, unsigned j) {
    IntDiffOperator r;
    if (V.is_zero()) return r;
    if (j == 0) {
        r.bdry.push_back({glp_one(), Functional::def_int(lo, hi, V), false, glp_one()});
        return r;
    }
    Rational vhi = laurent_poly_eval(V, hi);
    if (vhi != 0)
        r.bdry.push_back({GenLaurentPoly::constant(vhi), Functional::point_eval(hi, j - 1),
                          false, glp_one()});
    if (lo == 0) {
        // -c_0 ∘ (mult V) ∘ D^{j-1}
        IntDiffOperator c0;
        c0.bdry.push_back({GenLaurentPoly::constant(-1), Functional::coefficient(0, 0), false, V});
        IntDiffOperator dj = IntDiffOperator::derivative(j - 1);
        if (j - 1 == 0) dj = IntDiffOperator::identity();
        r = r + normalize_compose(normalize(c0), dj);
    } else {
        Rational vlo = laurent_poly_eval(V, lo);
        if (vlo != 0)
            r.bdry.push_back({GenLaurentPoly::constant(-vlo),
                              Functional::point_eval(lo, j - 1), false, glp_one()});
    }
    r = r + defint_after_diff(lo, hi, laurent_poly_derivative(V), j - 1).scaled(-1);
    return r;
}

// phi ∘ [A] ∘ (mult w) applied after a single term of the right factor
IntDiffOperator compose_bdry_after(const IntDiffOperator::BdryTerm& a,
                                   const IntDiffOperator& b_single);

IntDiffOperator compose_term_pair(const IntDiffOperator& a_single,
                                  const IntDiffOperator& b_single);

// the full functional value of phi on a Laurent polynomial
Rational apply_functional_to_poly(const Functional& phi, const GenLaurentPoly& h) {
    switch (phi.kind) {
    case Functional::PointEval:
        return laurent_poly_eval(laurent_poly_derivative(h, phi.deriv), phi.xi);
    case Functional::Coeff:
        return h.coeff(Rational(phi.k) + phi.mu);
    case Functional::DefInt: {
        GenLaurentPoly g = phi.weight * h;
        Rational s = 0;
        if (phi.lo == 0) {
            for (const auto& [e, c] : g.t) {
                if (e == -1)
                    throw LogObstruction("divergent definite integral: residue " +
                                         rat_to_string(c) + "*xi^-1");
                s += c * exact_rational_pow(phi.hi, e + 1) / (e + 1);
            }
        } else {
            for (const auto& [e, c] : g.t) {
                if (e == -1)
                    throw LogObstruction("definite integral of a residue term needs log(" +
                                         rat_to_string(phi.hi) + "/" + rat_to_string(phi.lo) + ")");
                s += c * (exact_rational_pow(phi.hi, e + 1) - exact_rational_pow(phi.lo, e + 1)) /
                     (e + 1);
            }
        }
        return s;
    }
    }
    return 0;
}

IntDiffOperator compose_bdry_after(const IntDiffOperator::BdryTerm& a,
                                   const IntDiffOperator& b_single) {
    IntDiffOperator r;
    const Functional& phi = a.phi;

    if (!b_single.diff.empty()) {
        const auto& bt = b_single.diff.front();
        GenLaurentPoly g = a.weight * bt.coeff;
        unsigned j = bt.j;
        if (a.through_A) {
            // A ∘ g ∘ D^j expanded one layer inside the functional
            if (j == 0) {
                r.bdry.push_back({glp_one(), phi, true, g});
            } else {
                // phi(g·f^{(j-1)}) - g(1) phi(1) f^{(j-1)}(1) - phi(A(g' f^{(j-1)}))
                IntDiffOperator::BdryTerm t1{glp_one(), phi, false, g};
                r = r + compose_bdry_after(t1, op_from_diff({glp_one(), j - 1}));
                Rational g1 = laurent_poly_eval(g, 1);
                Rational phi1 = apply_functional_to_poly(phi, glp_one());
                if (g1 != 0 && phi1 != 0)
                    r.bdry.push_back({GenLaurentPoly::constant(-g1 * phi1),
                                      Functional::point_eval(1, j - 1), false, glp_one()});
                IntDiffOperator::BdryTerm t3{glp_one(), phi, true,
                                             laurent_poly_derivative(g)};
                r = r + compose_bdry_after(t3, op_from_diff({glp_one(), j - 1})).scaled(-1);
            }
        } else {
            switch (phi.kind) {
            case Functional::PointEval:
                for (unsigned m = 0; m <= phi.deriv; ++m) {
                    GenLaurentPoly gd = laurent_poly_derivative(g, phi.deriv - m);
                    if (gd.is_zero()) continue;
                    Rational v = binom(phi.deriv, m) * laurent_poly_eval(gd, phi.xi);
                    if (v == 0) continue;
                    r.bdry.push_back({GenLaurentPoly::constant(v),
                                      Functional::point_eval(phi.xi, m + j), false, glp_one()});
                }
                break;
            case Functional::Coeff: {
                Rational target = Rational(phi.k) + phi.mu;
                for (const auto& [e, c] : g.t) {
                    Rational tau = target - e; // c_tau(f^{(j)}) = prod (tau+t) c_{tau+j}(f)
                    Rational fac = c;
                    for (unsigned t = 1; t <= j; ++t) fac *= tau + t;
                    if (fac == 0) continue;
                    auto [k2, mu2] = split_exponent(tau + j);
                    r.bdry.push_back({GenLaurentPoly::constant(fac),
                                      Functional::coefficient(k2, mu2), false, glp_one()});
                }
                break;
            }
            case Functional::DefInt:
                r = r + defint_after_diff(phi.lo, phi.hi, phi.weight * g, j);
                break;
            }
        }
        return left_multiply(a.left, normalize(r));
    }

    if (!b_single.integral.empty()) {
        const auto& bt = b_single.integral.front();
        if (a.through_A) {
            // phi ∘ A ∘ (w·v) ∘ A ∘ z  ->  phi ∘ (A(wv)) ∘ A ∘ z - phi ∘ A ∘ (A(wv)·z)
            GenLaurentPoly G = laurent_poly_integral(a.weight * bt.left);
            r = r + functional_weight_int(phi, G, bt.right);
            r.bdry.push_back({GenLaurentPoly::constant(-1), phi, true, G * bt.right});
        } else {
            r = r + functional_weight_int(phi, a.weight * bt.left, bt.right);
        }
        return left_multiply(a.left, normalize(r));
    }

    if (!b_single.bdry.empty()) {
        const auto& bt = b_single.bdry.front();
        GenLaurentPoly h = a.weight * bt.left;
        if (a.through_A) h = laurent_poly_integral(h);
        Rational s = apply_functional_to_poly(phi, h);
        if (s != 0) r.bdry.push_back({a.left.scaled(s), bt.phi, bt.through_A, bt.weight});
        return r;
    }

    return r;
}

IntDiffOperator compose_term_pair(const IntDiffOperator& a_single,
                                  const IntDiffOperator& b_single) {
    if (!a_single.diff.empty()) {
        const auto& at = a_single.diff.front();
        IntDiffOperator cur = b_single;
        for (unsigned i = 0; i < at.j; ++i) cur = differentiate_once(cur);
        return left_multiply(at.coeff, cur);
    }

    if (!a_single.integral.empty()) {
        const auto& at = a_single.integral.front();
        IntDiffOperator r;
        if (!b_single.diff.empty()) {
            const auto& bt = b_single.diff.front();
            r = int_after_diff(at.right * bt.coeff, bt.j);
        } else if (!b_single.integral.empty()) {
            // A ∘ g ∘ A ∘ z = (Ag) ∘ A ∘ z - A ∘ (Ag·z)   (Rota-Baxter, weight 0)
            const auto& bt = b_single.integral.front();
            GenLaurentPoly G = laurent_poly_integral(at.right * bt.left);
            r.integral.push_back({G, bt.right});
            GenLaurentPoly Gz = G * bt.right;
            if (!Gz.is_zero()) r.integral.push_back({GenLaurentPoly::constant(-1), Gz});
        } else if (!b_single.bdry.empty()) {
            const auto& bt = b_single.bdry.front();
            GenLaurentPoly Awm = laurent_poly_integral(at.right * bt.left);
            if (!Awm.is_zero()) r.bdry.push_back({Awm, bt.phi, bt.through_A, bt.weight});
        }
        return left_multiply(at.left, r);
    }

    if (!a_single.bdry.empty()) return compose_bdry_after(a_single.bdry.front(), b_single);

    return {};
}

} // namespace

IntDiffOperator normalize_compose(const IntDiffOperator& a, const IntDiffOperator& b) {
    IntDiffOperator an = normalize(a), bn = normalize(b);
    IntDiffOperator acc;
    auto each_b = [&](const IntDiffOperator& a_single) {
        for (const auto& t : bn.diff) acc = acc + compose_term_pair(a_single, op_from_diff(t));
        for (const auto& t : bn.integral) acc = acc + compose_term_pair(a_single, op_from_int(t));
        for (const auto& t : bn.bdry) acc = acc + compose_term_pair(a_single, op_from_bdry(t));
    };
    for (const auto& t : an.diff) each_b(op_from_diff(t));
    for (const auto& t : an.integral) each_b(op_from_int(t));
    for (const auto& t : an.bdry) each_b(op_from_bdry(t));
    return normalize(acc);
}

IntDiffOperator restrict_to_analytic(IntDiffOperator op) {
    op = normalize(std::move(op));
    IntDiffOperator r;
    r.diff = op.diff;
    r.integral = op.integral;
    for (const auto& t : op.bdry) {
        if (t.phi.kind == Functional::Coeff && (t.phi.mu != 0 || t.phi.k < 0))
            continue; // identically zero on analytic arguments
        r.bdry.push_back(t);
    }
    return r;
}

// ---- application -------------------------------------------------------------

Rational apply_functional_to_element(const Functional& phi, const GenLaurentElement& f,
                                     bool drop_residues) {
    switch (phi.kind) {
    case Functional::PointEval: {
        GenLaurentElement g = differentiate(f, static_cast<int>(phi.deriv));
        Rational s = 0;
        for (const auto& [mu, ser] : g.comp) {
            Rational part = 0;
            Rational xk = rat_pow(phi.xi, ser.N);
            for (size_t i = 0; i < ser.a.size(); ++i) {
                part += ser.a[i] * xk;
                xk *= phi.xi;
            }
            if (mu != 0) part *= exact_rational_pow(phi.xi, mu);
            s += part;
        }
        return s;
    }
    case Functional::Coeff:
        return coeff_extract(f, phi.k, phi.mu);
    case Functional::DefInt: {
        GenLaurentElement g = element_mul(GenLaurentElement::from_laurent_poly(phi.weight), f);
        Rational s = 0;
        for (const auto& [mu, ser] : g.comp) {
            for (size_t i = 0; i < ser.a.size(); ++i) {
                if (ser.a[i] == 0) continue;
                Rational e = Rational(ser.N + static_cast<long>(i)) + mu;
                if (e == -1) {
                    if (drop_residues) continue;
                    throw LogObstruction("definite integral met a residue term");
                }
                if (phi.lo == 0)
                    s += ser.a[i] * exact_rational_pow(phi.hi, e + 1) / (e + 1);
                else
                    s += ser.a[i] *
                         (exact_rational_pow(phi.hi, e + 1) - exact_rational_pow(phi.lo, e + 1)) /
                         (e + 1);
            }
        }
        return s;
    }
    }
    return 0;
}

GenLaurentElement apply_to_series(const IntDiffOperator& op, const GenLaurentElement& f,
                                  bool drop_residues) {
    GenLaurentElement r = GenLaurentElement::zero();
    for (const auto& t : op.diff) {
        GenLaurentElement d = differentiate(f, static_cast<int>(t.j));
        r = r + element_mul(GenLaurentElement::from_laurent_poly(t.coeff), d);
    }
    for (const auto& t : op.integral) {
        GenLaurentElement inner =
            element_mul(GenLaurentElement::from_laurent_poly(t.right), f);
        GenLaurentElement Ai = integrate_rb(inner, drop_residues);
        r = r + element_mul(GenLaurentElement::from_laurent_poly(t.left), Ai);
    }
    for (const auto& t : op.bdry) {
        GenLaurentElement arg = f;
        const bool trivial_weight = (t.weight.t.size() == 1 && t.weight.coeff(0) == 1);
        if (!trivial_weight)
            arg = element_mul(GenLaurentElement::from_laurent_poly(t.weight), arg);
        if (t.through_A) arg = integrate_rb(arg, drop_residues);
        Rational s = apply_functional_to_element(t.phi, arg, drop_residues);
        if (s != 0)
            r = r + GenLaurentElement::from_laurent_poly(t.left.scaled(s));
    }
    r.normalize();
    return r;
}

// ---- kernel extraction --------------------------------------------------------

GreensFunction extract_greens_function(const IntDiffOperator& op_in) {
    IntDiffOperator op = normalize(op_in);
    if (!op.diff.empty())
        throw DistributionalKernel("operator has a differential/multiplication term (" +
                                   op.diff.front().coeff.to_string() + "·D^" +
                                   std::to_string(op.diff.front().j) +
                                   "); no integral kernel exists");

    struct Ranged {
        GenLaurentPoly p, q;
        Rational lo, hi;
    };
    std::vector<Ranged> everywhere; // from definite-integral terms
    std::vector<GreensFunction::Term> upper; // from A terms, live on xi > x

    for (const auto& t : op.integral) upper.push_back({t.left.scaled(-1), t.right});
    for (const auto& t : op.bdry) {
        if (t.phi.kind != Functional::DefInt)
            throw DistributionalKernel("boundary term through " + t.phi.to_string() +
                                       " is not representable by an integral kernel");
        everywhere.push_back({t.left, t.phi.weight, t.phi.lo, t.phi.hi});
    }

    GreensFunction g;
    std::vector<Rational> cuts;
    for (const auto& e : everywhere) {
        if (e.lo > 0) cuts.push_back(e.lo);
        if (e.hi < 1) cuts.push_back(e.hi);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    g.breakpoints = cuts;

    std::vector<Rational> edges;
    edges.push_back(0);
    for (const auto& c : cuts) edges.push_back(c);
    edges.push_back(1);

    for (size_t i = 0; i + 1 < edges.size(); ++i) {
        Rational clo = edges[i], chi = edges[i + 1];
        GreensFunction::Piece below{GreensFunction::XiBelowX, clo, chi, {}};
        GreensFunction::Piece above{GreensFunction::XiAboveX, clo, chi, {}};
        for (const auto& e : everywhere) {
            if (e.lo <= clo && chi <= e.hi) {
                below.terms.push_back({e.p, e.q});
                above.terms.push_back({e.p, e.q});
            }
        }
        for (const auto& t : upper) above.terms.push_back(t);
        g.pieces.push_back(std::move(below));
        g.pieces.push_back(std::move(above));
    }
    return g;
}

Rational GreensFunction::eval(const Rational& x, const Rational& xi) const {
    for (const auto& piece : pieces) {
        if (xi < piece.lo || xi > piece.hi) continue;
        if (piece.rel == XiBelowX && !(xi <= x)) continue;
        if (piece.rel == XiAboveX && !(xi >= x)) continue;
        Rational s = 0;
        for (const auto& t : piece.terms)
            s += laurent_poly_eval(t.p, x) * laurent_poly_eval(t.q, xi);
        return s;
    }
    return 0;
}

double GreensFunction::eval_double(double x, double xi) const {
    for (const auto& piece : pieces) {
        double lo = rat_to_double(piece.lo), hi = rat_to_double(piece.hi);
        if (xi < lo || xi > hi) continue;
        if (piece.rel == XiBelowX && xi > x) continue;
        if (piece.rel == XiAboveX && xi < x) continue;
        double s = 0;
        for (const auto& t : piece.terms) s += t.p.eval_double(x) * t.q.eval_double(xi);
        return s;
    }
    return 0;
}

// ---- printing / serialization ---------------------------------------------------

std::string IntDiffOperator::to_string() const {
    std::ostringstream os;
    bool first = true;
    auto sep = [&]() {
        if (!first) os << " + ";
        first = false;
    };
    for (const auto& t : diff) {
        sep();
        os << "(" << t.coeff.to_string() << ")";
        if (t.j > 0) os << "·D^" << t.j;
    }
    for (const auto& t : integral) {
        sep();
        os << "(" << t.left.to_string() << ")·A·(" << t.right.to_string("xi") << ")";
    }
    for (const auto& t : bdry) {
        sep();
        os << "(" << t.left.to_string() << ")·" << t.phi.to_string();
        if (t.through_A) os << "∘A∘(" << t.weight.to_string("xi") << ")";
    }
    if (first) os << "0";
    return os.str();
}

namespace {

json glp_to_json(const GenLaurentPoly& p) {
    json arr = json::array();
    for (const auto& [e, c] : p.t) arr.push_back({rat_to_string(e), rat_to_string(c)});
    return arr;
}

json functional_to_json(const Functional& phi) {
    switch (phi.kind) {
    case Functional::PointEval:
        return {{"kind", "point_eval"}, {"xi", rat_to_string(phi.xi)}, {"deriv", phi.deriv}};
    case Functional::Coeff:
        return {{"kind", "coeff"}, {"k", phi.k}, {"mu", rat_to_string(phi.mu)}};
    case Functional::DefInt:
        return {{"kind", "def_int"},
                {"lo", rat_to_string(phi.lo)},
                {"hi", rat_to_string(phi.hi)},
                {"weight", glp_to_json(phi.weight)}};
    }
    return {};
}

} // namespace

std::string operator_to_json(const IntDiffOperator& op) {
    json j;
    j["diff"] = json::array();
    for (const auto& t : op.diff)
        j["diff"].push_back({{"coeff", glp_to_json(t.coeff)}, {"order", t.j}});
    j["integral"] = json::array();
    for (const auto& t : op.integral)
        j["integral"].push_back({{"left", glp_to_json(t.left)}, {"right", glp_to_json(t.right)}});
    j["boundary"] = json::array();
    for (const auto& t : op.bdry)
        j["boundary"].push_back(
            {{"left", glp_to_json(t.left)}, {"functional", functional_to_json(t.phi)}});
    return j.dump(2);
}

std::string greens_function_to_json(const GreensFunction& g) {
    json j;
    j["breakpoints"] = json::array();
    for (const auto& b : g.breakpoints) j["breakpoints"].push_back(rat_to_string(b));
    j["pieces"] = json::array();
    for (const auto& piece : g.pieces) {
        json terms = json::array();
        for (const auto& t : piece.terms)
            terms.push_back({{"p", glp_to_json(t.p)}, {"q", glp_to_json(t.q)}});
        j["pieces"].push_back({{"region", piece.rel == GreensFunction::XiBelowX ? "xi<=x"
                                          : piece.rel == GreensFunction::XiAboveX ? "xi>=x"
                                                                                  : "all"},
                               {"cell", {rat_to_string(piece.lo), rat_to_string(piece.hi)}},
                               {"terms", terms}});
    }
    return j.dump(2);
}

} // namespace greenbp
