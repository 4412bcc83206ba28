#include "greenbp/laurent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace greenbp {

// ---------------------------------------------------------------- GenLaurentPoly

GenLaurentPoly GenLaurentPoly::monomial(const Rational& coeff, const Rational& expo) {
    GenLaurentPoly p;
    if (coeff != 0) p.t[expo] = coeff;
    return p;
}

GenLaurentPoly GenLaurentPoly::from_poly(const Poly& p) {
    GenLaurentPoly r;
    for (size_t i = 0; i < p.c.size(); ++i)
        if (p.c[i] != 0) r.t[Rational(i)] = p.c[i];
    return r;
}

Rational GenLaurentPoly::coeff(const Rational& e) const {
    auto it = t.find(e);
    return it == t.end() ? Rational(0) : it->second;
}

Rational GenLaurentPoly::order() const {
    if (t.empty()) throw std::domain_error("order of zero");
    return t.begin()->first;
}

GenLaurentPoly GenLaurentPoly::operator-() const {
    GenLaurentPoly r = *this;
    for (auto& [e, c] : r.t) c = -c;
    return r;
}

GenLaurentPoly operator+(const GenLaurentPoly& a, const GenLaurentPoly& b) {
    GenLaurentPoly r = a;
    for (const auto& [e, c] : b.t) {
        auto [it, fresh] = r.t.try_emplace(e, c);
        if (!fresh) {
            it->second += c;
            if (it->second == 0) r.t.erase(it);
        }
    }
    return r;
}

GenLaurentPoly operator-(const GenLaurentPoly& a, const GenLaurentPoly& b) { return a + (-b); }

GenLaurentPoly operator*(const GenLaurentPoly& a, const GenLaurentPoly& b) {
    GenLaurentPoly r;
    for (const auto& [ea, ca] : a.t)
        for (const auto& [eb, cb] : b.t) {
            Rational e = ea + eb, c = ca * cb;
            auto [it, fresh] = r.t.try_emplace(e, c);
            if (!fresh) {
                it->second += c;
                if (it->second == 0) r.t.erase(it);
            }
        }
    return r;
}

GenLaurentPoly GenLaurentPoly::scaled(const Rational& s) const {
    GenLaurentPoly r;
    if (s == 0) return r;
    for (const auto& [e, c] : t) r.t[e] = c * s;
    return r;
}

GenLaurentPoly GenLaurentPoly::derivative() const {
    GenLaurentPoly r;
    for (const auto& [e, c] : t)
        if (e != 0) r.t[e - 1] = c * e;
    return r;
}

Rational GenLaurentPoly::eval(const Rational& x) const {
    Rational acc = 0;
    for (const auto& [e, c] : t) {
        if (!rat_is_integer(e))
            throw std::domain_error("exact evaluation with fractional exponent " + rat_to_string(e));
        acc += c * rat_pow(x, rat_to_long(e));
    }
    return acc;
}

double GenLaurentPoly::eval_double(double x) const {
    double acc = 0;
    for (const auto& [e, c] : t) acc += rat_to_double(c) * std::pow(x, rat_to_double(e));
    return acc;
}

std::string GenLaurentPoly::to_string(const std::string& var) const {
    if (t.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : t) {
        Rational a = c;
        if (first) {
            if (a < 0) { os << "-"; a = -a; }
        } else {
            os << (a < 0 ? " - " : " + ");
            if (a < 0) a = -a;
        }
        first = false;
        bool unit = (a == 1) && e != 0;
        if (!unit) os << rat_to_string(a);
        if (e != 0) {
            if (!unit) os << "*";
            os << var;
            if (e != 1) {
                if (rat_is_integer(e) && e > 0) os << "^" << rat_to_string(e);
                else os << "^(" << rat_to_string(e) << ")";
            }
        }
    }
    return os.str();
}

// ---------------------------------------------------------------- GenLaurentSeries

void GenLaurentSeries::normalize() {
    size_t lead = 0;
    while (lead < a.size() && a[lead] == 0) ++lead;
    if (lead > 0) {
        a.erase(a.begin(), a.begin() + lead);
        N += static_cast<long>(lead);
    }
    if (is_exact()) {
        while (!a.empty() && a.back() == 0) a.pop_back();
    } else {
        // keep trailing zeros: inside the window they are knowledge
        if (static_cast<long>(a.size()) != *top - N)
            a.resize(static_cast<size_t>(std::max<long>(*top - N, 0)), Rational(0));
        if (N > *top) N = *top;
    }
}

Rational GenLaurentSeries::coeff(long k) const {
    if (k < N) return Rational(0);
    if (!is_exact() && k >= *top)
        throw TruncationExceeded("coefficient index " + std::to_string(k) +
                                 " beyond computed window top " + std::to_string(*top));
    size_t i = static_cast<size_t>(k - N);
    return i < a.size() ? a[i] : Rational(0);
}

// ---------------------------------------------------------------- GenLaurentElement

static std::optional<Rational> min_opt(const std::optional<Rational>& a,
                                       const std::optional<Rational>& b) {
    if (!a) return b;
    if (!b) return a;
    return std::min(*a, *b);
}

static std::optional<long> min_top(const std::optional<long>& a, const std::optional<long>& b) {
    if (!a) return b;
    if (!b) return a;
    return std::min(*a, *b);
}

GenLaurentElement GenLaurentElement::from_laurent_poly(const GenLaurentPoly& p) {
    GenLaurentElement u;
    for (const auto& [e, c] : p.t) {
        Rational mu = rat_frac(e);
        long k = rat_floor(e);
        auto& s = u.comp[mu];
        if (s.a.empty()) { s.mu = mu; s.N = k; }
        if (k < s.N) {
            s.a.insert(s.a.begin(), static_cast<size_t>(s.N - k), Rational(0));
            s.N = k;
        }
        size_t i = static_cast<size_t>(k - s.N);
        if (i >= s.a.size()) s.a.resize(i + 1, Rational(0));
        s.a[i] = c;
    }
    u.normalize();
    return u;
}

GenLaurentElement GenLaurentElement::monomial(const Rational& coeff, const Rational& expo) {
    return from_laurent_poly(GenLaurentPoly::monomial(coeff, expo));
}

bool GenLaurentElement::is_zero() const {
    for (const auto& [mu, s] : comp)
        for (const auto& c : s.a)
            if (c != 0) return false;
    return true;
}

bool GenLaurentElement::is_exact() const {
    for (const auto& [mu, s] : comp)
        if (!s.is_exact()) return false;
    return true;
}

GenLaurentPoly GenLaurentElement::to_laurent_poly() const {
    if (!is_exact())
        throw TruncationExceeded("conversion of a truncated element to a Laurent polynomial");
    GenLaurentPoly p;
    for (const auto& [mu, s] : comp)
        for (size_t i = 0; i < s.a.size(); ++i)
            if (s.a[i] != 0) p.t[mu + Rational(s.N + static_cast<long>(i))] = s.a[i];
    return p;
}

void GenLaurentElement::normalize() {
    for (auto it = comp.begin(); it != comp.end();) {
        it->second.normalize();
        bool dead = it->second.is_exact() && it->second.a.empty();
        it = dead ? comp.erase(it) : std::next(it);
    }
}

GenLaurentElement GenLaurentElement::operator-() const {
    GenLaurentElement r = *this;
    for (auto& [mu, s] : r.comp)
        for (auto& c : s.a) c = -c;
    return r;
}

std::optional<Rational> GenLaurentElement::min_radius() const {
    std::optional<Rational> r;
    for (const auto& [mu, s] : comp) r = min_opt(r, s.radius);
    return r;
}

std::string GenLaurentElement::to_string(int max_terms) const {
    if (comp.empty()) return "0";
    std::ostringstream os;
    int shown = 0;
    bool first = true;
    for (const auto& [mu, s] : comp) {
        for (size_t i = 0; i < s.a.size() && shown < max_terms; ++i) {
            if (s.a[i] == 0) continue;
            Rational e = mu + Rational(s.N + static_cast<long>(i));
            Rational c = s.a[i];
            if (!first) os << (c < 0 ? " - " : " + ");
            else if (c < 0) os << "-";
            first = false;
            Rational ac = c < 0 ? -c : c;
            os << rat_to_string(ac);
            if (e != 0) os << "*x^(" << rat_to_string(e) << ")";
            ++shown;
        }
        if (!s.is_exact()) {
            os << (first ? "" : " + ") << "O(x^" << *s.top << ")";
            first = false;
        }
    }
    if (first) return "0";
    return os.str();
}

static GenLaurentSeries add_series(const GenLaurentSeries& x, const GenLaurentSeries& y) {
    GenLaurentSeries r;
    r.mu = x.mu;
    r.top = min_top(x.top, y.top);
    r.radius = min_opt(x.radius, y.radius);
    long lo = std::min(x.N, y.N);
    long hi; // exclusive
    if (r.top) {
        hi = *r.top;
    } else {
        hi = std::max(x.N + static_cast<long>(x.a.size()), y.N + static_cast<long>(y.a.size()));
    }
    r.N = lo;
    if (hi < lo) hi = lo;
    r.a.assign(static_cast<size_t>(hi - lo), Rational(0));
    auto acc = [&](const GenLaurentSeries& s) {
        for (size_t i = 0; i < s.a.size(); ++i) {
            long k = s.N + static_cast<long>(i);
            if (k >= lo && k < hi) r.a[static_cast<size_t>(k - lo)] += s.a[i];
        }
    };
    acc(x);
    acc(y);
    r.normalize();
    return r;
}

GenLaurentElement element_add(const GenLaurentElement& a, const GenLaurentElement& b) {
    GenLaurentElement r = a;
    for (const auto& [mu, s] : b.comp) {
        auto it = r.comp.find(mu);
        if (it == r.comp.end()) r.comp[mu] = s;
        else it->second = add_series(it->second, s);
    }
    r.normalize();
    return r;
}

GenLaurentElement element_sub(const GenLaurentElement& a, const GenLaurentElement& b) {
    return element_add(a, -b);
}

GenLaurentElement element_scalar(const GenLaurentElement& a, const Rational& s) {
    if (s == 0) return GenLaurentElement::zero();
    GenLaurentElement r = a;
    for (auto& [mu, c] : r.comp)
        for (auto& v : c.a) v *= s;
    return r;
}

GenLaurentElement element_mul(const GenLaurentElement& a, const GenLaurentElement& b) {
    GenLaurentElement r;
    for (const auto& [mua, sa] : a.comp) {
        for (const auto& [mub, sb] : b.comp) {
            Rational musum = mua + mub;
            long carry = 0;
            if (musum >= 1) { musum -= 1; carry = 1; }
            // window of the partial product, in k-indices of the target class
            std::optional<long> ptop;
            if (sa.top) ptop = min_top(ptop, std::optional<long>(*sa.top + sb.N + carry));
            if (sb.top) ptop = min_top(ptop, std::optional<long>(*sb.top + sa.N + carry));

            GenLaurentSeries p;
            p.mu = musum;
            p.N = sa.N + sb.N + carry;
            p.top = ptop;
            p.radius = min_opt(sa.radius, sb.radius);
            long hi = ptop ? *ptop
                           : p.N + static_cast<long>(sa.a.size() + sb.a.size()) - 1;
            if (hi < p.N) hi = p.N;
            p.a.assign(static_cast<size_t>(hi - p.N), Rational(0));
            for (size_t i = 0; i < sa.a.size(); ++i) {
                if (sa.a[i] == 0) continue;
                for (size_t j = 0; j < sb.a.size(); ++j) {
                    if (sb.a[j] == 0) continue;
                    long k = sa.N + static_cast<long>(i) + sb.N + static_cast<long>(j) + carry;
                    if (k < p.N || k >= hi) continue;
                    p.a[static_cast<size_t>(k - p.N)] += sa.a[i] * sb.a[j];
                }
            }
            p.normalize();
            auto it = r.comp.find(p.mu);
            if (it == r.comp.end()) r.comp[p.mu] = std::move(p);
            else it->second = add_series(it->second, p);
        }
    }
    r.normalize();
    return r;
}

bool element_equal(const GenLaurentElement& a, const GenLaurentElement& b) {
    GenLaurentElement x = a, y = b;
    x.normalize();
    y.normalize();
    if (x.comp.size() != y.comp.size()) return false;
    for (auto itx = x.comp.begin(), ity = y.comp.begin(); itx != x.comp.end(); ++itx, ++ity) {
        if (itx->first != ity->first) return false;
        const auto& sx = itx->second;
        const auto& sy = ity->second;
        if (sx.N != sy.N || sx.a != sy.a || sx.top != sy.top) return false;
    }
    return true;
}

bool element_equal_window(const GenLaurentElement& a, const GenLaurentElement& b) {
    GenLaurentElement d = element_sub(a, b);
    return d.is_zero();
}

GenLaurentElement laurent_expand(const RationalFunction& rf0, long upto) {
    RationalFunction rf = rf0;
    rf.reduce();
    if (rf.is_zero()) return GenLaurentElement::zero();

    // den = c * x^v * D(x) with D(0) = 1
    Poly den = rf.den;
    size_t v = 0;
    while (v < den.c.size() && den.c[v] == 0) ++v;
    Poly D;
    D.c.assign(den.c.begin() + v, den.c.end());
    Rational c0 = D.c[0];
    D *= Rational(1) / c0;

    std::optional<Rational> radius = expansion_radius(rf.den);

    GenLaurentSeries s;
    s.mu = 0;
    s.radius = radius;
    long nlo = 0; // numerator is a plain polynomial
    s.N = nlo - static_cast<long>(v);
    if (D.degree() == 0) {
        // exact Laurent polynomial
        s.a.assign(rf.num.c.size(), Rational(0));
        for (size_t i = 0; i < rf.num.c.size(); ++i) s.a[i] = rf.num.c[i] / c0;
        s.radius.reset();
    } else {
        long len = upto + 1 - s.N;
        if (len < 0) len = 0;
        // inverse of D as a power series, then multiply by num
        size_t want = static_cast<size_t>(len);
        std::vector<Rational> inv(want, Rational(0));
        if (want > 0) inv[0] = 1;
        for (size_t k = 1; k < want; ++k) {
            Rational acc = 0;
            for (size_t j = 1; j <= std::min(k, static_cast<size_t>(D.degree())); ++j)
                acc += D.c[j] * inv[k - j];
            inv[k] = -acc;
        }
        s.a.assign(want, Rational(0));
        for (size_t i = 0; i < rf.num.c.size(); ++i) {
            if (rf.num.c[i] == 0) continue;
            for (size_t k = 0; i + k < want; ++k) s.a[i + k] += rf.num.c[i] * inv[k] / c0;
        }
        s.top = upto + 1;
    }
    GenLaurentElement u;
    s.normalize();
    u.comp[Rational(0)] = std::move(s);
    u.normalize();
    return u;
}

GenLaurentElement differentiate(const GenLaurentElement& u) {
    GenLaurentElement r;
    for (const auto& [mu, s] : u.comp) {
        GenLaurentSeries d;
        d.mu = mu;
        d.N = s.N - 1;
        d.radius = s.radius;
        if (s.top) d.top = *s.top - 1;
        d.a.assign(s.a.size(), Rational(0));
        for (size_t i = 0; i < s.a.size(); ++i) {
            Rational e = mu + Rational(s.N + static_cast<long>(i));
            d.a[i] = s.a[i] * e;
        }
        d.normalize();
        if (!(d.is_exact() && d.a.empty())) r.comp[mu] = std::move(d);
    }
    r.normalize();
    return r;
}

GenLaurentElement differentiate(const GenLaurentElement& u, int times) {
    GenLaurentElement r = u;
    for (int i = 0; i < times; ++i) r = differentiate(r);
    return r;
}

Rational residue_coefficient(const GenLaurentElement& u) {
    auto it = u.comp.find(Rational(0));
    if (it == u.comp.end()) return 0;
    return it->second.coeff(-1);
}

// termwise antiderivative (no constant), the partial value of it at 1, and
// the residue that had to be skipped
struct AntiderivParts {
    GenLaurentElement F;
    Rational F_at_1 = 0;
    Rational residue = 0;
};

static AntiderivParts antiderivative_parts(const GenLaurentElement& u) {
    AntiderivParts out;
    for (const auto& [mu, s] : u.comp) {
        GenLaurentSeries F;
        F.mu = mu;
        F.N = s.N + 1;
        F.radius = s.radius;
        if (s.top) F.top = *s.top + 1;
        F.a.assign(s.a.size(), Rational(0));
        for (size_t i = 0; i < s.a.size(); ++i) {
            Rational e = mu + Rational(s.N + static_cast<long>(i));
            if (e == -1) {
                out.residue = s.a[i];
                continue; // slot stays zero; the log lives elsewhere
            }
            Rational c = s.a[i] / (e + 1);
            F.a[i] = c;
            out.F_at_1 += c;
        }
        F.normalize();
        auto it = out.F.comp.find(mu);
        if (it == out.F.comp.end()) out.F.comp[mu] = std::move(F);
        else it->second = add_series(it->second, F);
    }
    out.F.normalize();
    return out;
}

GenLaurentElement integrate_rb(const GenLaurentElement& u, bool drop_residue) {
    AntiderivParts p = antiderivative_parts(u);
    if (p.residue != 0 && !drop_residue)
        throw LogObstruction("residue " + rat_to_string(p.residue) +
                             " at exponent -1: the integral leaves the series algebra");
    GenLaurentElement r = element_sub(p.F, GenLaurentElement::monomial(p.F_at_1, 0));
    // the constant subtraction must not pretend to more knowledge than F has
    std::optional<Rational> rad = u.min_radius();
    for (auto& [mu, s] : r.comp) s.radius = min_opt(s.radius, rad);
    return r;
}

GenLaurentElement project_component(const GenLaurentElement& u, ComponentPart which,
                                    const Rational& mu) {
    GenLaurentElement r;
    for (const auto& [m, s] : u.comp) {
        if (which == ComponentPart::indicial) {
            if (m == mu) r.comp[m] = s;
            continue;
        }
        // pp: exponents k+m < 0, i.e. k <= -1; reg: k >= 0
        GenLaurentSeries t = s;
        if (which == ComponentPart::pp) {
            // cut window to k <= -1
            long hi = 0; // exclusive
            if (t.N >= hi) continue;
            long len = hi - t.N;
            if (static_cast<long>(t.a.size()) > len) t.a.resize(static_cast<size_t>(len));
            t.top.reset(); // the pp slice is finite and fully known once the
                           // window reaches 0
            if (s.top && *s.top < 0)
                t.top = s.top; // window ended before reaching 0: still truncated
        } else {
            long lo = 0;
            if (t.N < lo) {
                long drop = lo - t.N;
                if (drop >= static_cast<long>(t.a.size())) t.a.clear();
                else t.a.erase(t.a.begin(), t.a.begin() + drop);
                t.N = lo;
            }
        }
        t.normalize();
        if (!(t.is_exact() && t.a.empty())) r.comp[m] = std::move(t);
    }
    r.normalize();
    return r;
}

Rational coeff_extract(const GenLaurentElement& u, long k, const Rational& mu) {
    auto it = u.comp.find(mu);
    if (it == u.comp.end()) return 0;
    return it->second.coeff(k);
}

// floor of the q-th root of a nonnegative integer
static Int int_root(const Int& n, unsigned q) {
    if (n <= 1) return n;
    Int lo = 1, hi = n;
    while (lo < hi) {
        Int mid = (lo + hi + 1) / 2;
        if (boost::multiprecision::pow(mid, q) <= n) lo = mid;
        else hi = mid - 1;
    }
    return lo;
}

// enclose x0^(p/q) for x0 in (0,1], 0 < p/q < 1; exact when the root is
// rational, 2^-128 bisection enclosure otherwise
static void enclose_fractional_power(const Rational& x0, const Rational& mu, Rational& lo,
                                     Rational& hi) {
    long p = rat_to_long(Rational(numer(mu)));
    unsigned q = static_cast<unsigned>(rat_to_long(Rational(denom(mu))));
    Rational y = rat_pow(x0, p); // in (0,1]
    Int rn = int_root(numer(y), q), rd = int_root(denom(y), q);
    if (boost::multiprecision::pow(rn, q) == numer(y) &&
        boost::multiprecision::pow(rd, q) == denom(y)) {
        lo = hi = Rational(rn, rd);
        return;
    }
    lo = 0;
    hi = 1;
    for (int i = 0; i < 128; ++i) {
        Rational mid = (lo + hi) / 2;
        if (rat_pow(mid, q) <= y) lo = mid;
        else hi = mid;
    }
}

PartialValue evaluate_partial(const GenLaurentElement& u, const Rational& x0) {
    if (!(x0 > 0 && x0 <= 1))
        throw std::domain_error("evaluate_partial expects x0 in (0,1]");
    PartialValue out;
    out.value = 0;
    out.tail_bound = Rational(0);
    for (const auto& [mu, s] : u.comp) {
        Rational partial = 0;
        for (size_t i = 0; i < s.a.size(); ++i)
            if (s.a[i] != 0) partial += s.a[i] * rat_pow(x0, s.N + static_cast<long>(i));
        Rational absmax_pow = 0; // see below
        if (mu == 0) {
            out.value += partial;
        } else {
            Rational lo, hi;
            enclose_fractional_power(x0, mu, lo, hi);
            Rational mid = (lo + hi) / 2;
            out.value += mid * partial;
            if (out.tail_bound) {
                Rational width = hi - lo;
                Rational ap = partial < 0 ? -partial : partial;
                *out.tail_bound += width * ap;
            }
        }
        if (!s.is_exact() && out.tail_bound) {
            if (!s.radius || x0 >= *s.radius) {
                out.tail_bound.reset(); // no usable geometric bound
            } else {
                const Rational& r = *s.radius;
                Rational C = 0;
                for (size_t i = 0; i < s.a.size(); ++i) {
                    if (s.a[i] == 0) continue;
                    Rational m = s.a[i] < 0 ? -s.a[i] : s.a[i];
                    m *= rat_pow(r, s.N + static_cast<long>(i));
                    if (m > C) C = m;
                }
                Rational ratio = x0 / r;
                *out.tail_bound += C * rat_pow(ratio, *s.top) / (1 - ratio);
            }
        }
        (void)absmax_pow;
    }
    return out;
}

double evaluate_partial_double(const GenLaurentElement& u, double x0) {
    double acc = 0;
    for (const auto& [mu, s] : u.comp) {
        double partial = 0;
        // Horner over the integer part, highest first
        for (size_t i = s.a.size(); i-- > 0;) partial = partial * x0 + rat_to_double(s.a[i]);
        partial *= std::pow(x0, static_cast<double>(s.N) + rat_to_double(mu));
        acc += partial;
    }
    return acc;
}

Rational falling_factorial(const Rational& n, unsigned k) {
    Rational acc = 1;
    for (unsigned i = 0; i < k; ++i) acc *= (n - Rational(i));
    return acc;
}

// ---------------------------------------------------------------- LogElement

LogElement log_add(const LogElement& a, const LogElement& b) {
    return {element_add(a.base, b.base), element_add(a.logpart, b.logpart)};
}

LogElement log_mul_element(const LogElement& a, const GenLaurentElement& f) {
    return {element_mul(a.base, f), element_mul(a.logpart, f)};
}

LogElement log_differentiate(const LogElement& a) {
    GenLaurentElement inv_x = GenLaurentElement::monomial(1, -1);
    return {element_add(differentiate(a.base), element_mul(a.logpart, inv_x)),
            differentiate(a.logpart)};
}

// coefficient-wise division by the exponent (used for the polynomial part of
// integrating f * log x); every stored nonzero term must have exponent != 0
static GenLaurentElement divide_by_exponent(const GenLaurentElement& u) {
    GenLaurentElement r = u;
    for (auto& [mu, s] : r.comp) {
        for (size_t i = 0; i < s.a.size(); ++i) {
            if (s.a[i] == 0) continue;
            Rational e = mu + Rational(s.N + static_cast<long>(i));
            if (e == 0) throw std::logic_error("divide_by_exponent hit exponent 0");
            s.a[i] /= e;
        }
    }
    return r;
}

LogElement log_integrate_rb(const LogElement& u) {
    if (residue_coefficient(u.logpart) != 0)
        throw LogObstruction("residue times log x integrates to log^2, outside the algebra");

    // integral of the log-free part; its residue feeds the log coefficient
    AntiderivParts pb = antiderivative_parts(u.base);
    GenLaurentElement base =
        element_sub(pb.F, GenLaurentElement::monomial(pb.F_at_1, 0));
    GenLaurentElement logpart = GenLaurentElement::monomial(pb.residue, 0);

    // integral of l_e x^e log x  =  x^{e+1} log x/(e+1) - x^{e+1}/(e+1)^2 + 1/(e+1)^2
    AntiderivParts pl = antiderivative_parts(u.logpart);
    logpart = element_add(logpart, pl.F);
    GenLaurentElement H = divide_by_exponent(pl.F);
    Rational H1 = 0;
    for (const auto& [mu, s] : H.comp)
        for (const auto& c : s.a) H1 += c;
    base = element_sub(base, element_sub(H, GenLaurentElement::monomial(H1, 0)));

    std::optional<Rational> rad = min_opt(u.base.min_radius(), u.logpart.min_radius());
    for (auto& [mu, s] : base.comp) s.radius = min_opt(s.radius, rad);
    for (auto& [mu, s] : logpart.comp) s.radius = min_opt(s.radius, rad);
    return {base, logpart};
}

double log_evaluate_double(const LogElement& a, double x0) {
    double v = evaluate_partial_double(a.base, x0);
    if (!a.logpart.is_zero()) v += std::log(x0) * evaluate_partial_double(a.logpart, x0);
    return v;
}

GenLaurentElement element_truncate(const GenLaurentElement& u, const Rational& upto) {
    GenLaurentElement r;
    for (const auto& [mu, s] : u.comp) {
        long kmax = rat_floor(upto - mu); // largest claimable index in this class
        long new_top = kmax + 1;
        GenLaurentSeries t = s;
        if (t.is_exact()) {
            if (new_top < t.N) {
                t.N = new_top;
                t.a.clear();
            } else {
                t.a.resize(static_cast<size_t>(new_top - t.N), Rational(0));
            }
            t.top = new_top;
        } else if (new_top < *t.top) {
            if (new_top < t.N) {
                t.N = new_top;
                t.a.clear();
            } else {
                t.a.resize(static_cast<size_t>(new_top - t.N));
            }
            t.top = new_top;
        }
        t.normalize();
        r.comp[mu] = std::move(t);
    }
    r.normalize();
    return r;
}

GenLaurentElement element_invert(const GenLaurentElement& u0, const Rational& upto) {
    GenLaurentElement u = u0;
    u.normalize();
    if (u.is_zero()) throw std::domain_error("element_invert: no known nonzero term");

    // leading term: after normalize() a nonempty window starts at a nonzero
    // coefficient, so the candidates are the window starts
    bool have = false;
    Rational lead_e, lead_c;
    for (const auto& [mu, s] : u.comp) {
        if (s.a.empty()) continue;
        Rational e = Rational(s.N) + mu;
        if (!have || e < lead_e) {
            have = true;
            lead_e = e;
            lead_c = s.a.front();
        }
    }
    for (const auto& [mu, s] : u.comp) {
        if (!s.a.empty() || s.is_exact()) continue;
        if (Rational(s.N) + mu <= lead_e)
            throw TruncationExceeded("element_invert: leading term hidden by a truncated window");
    }

    GenLaurentElement m = GenLaurentElement::monomial(1 / lead_c, -lead_e);
    GenLaurentElement w = element_mul(u, m) - GenLaurentElement::monomial(1, 0);
    w.normalize();

    if (w.is_zero() && w.is_exact()) return m; // exact monomial inverse

    // Single-class fast path: the reciprocal coefficients satisfy a direct
    // recurrence (g_0 = 1/a_0, g_k = -(sum_{i>=1} a_i g_{k-i}) / a_0), which
    // is quadratic in the window width; the geometric series below multiplies
    // whole elements per power and goes cubic.
    {
        const GenLaurentSeries* only = nullptr;
        size_t with_content = 0;
        for (const auto& [mu, s] : u.comp)
            if (!s.a.empty() || !s.is_exact()) {
                ++with_content;
                only = &s;
            }
        if (with_content == 1 && !only->a.empty()) {
            const GenLaurentSeries& s = *only;
            const Rational lead = Rational(s.N) + s.mu;
            long K = rat_floor(upto + lead); // reciprocal indices needed: 0..K
            long avail = s.is_exact() ? (K >= 0 ? K + 1 : 0)
                                      : std::min<long>(K + 1, static_cast<long>(s.a.size()));
            if (avail > 0) {
                std::vector<Rational> g(static_cast<size_t>(avail));
                const Rational& a0 = s.a.front();
                g[0] = 1 / a0;
                for (long k = 1; k < avail; ++k) {
                    Rational acc = 0;
                    long imax = std::min<long>(k, static_cast<long>(s.a.size()) - 1);
                    for (long i = 1; i <= imax; ++i)
                        if (s.a[static_cast<size_t>(i)] != 0)
                            acc += s.a[static_cast<size_t>(i)] * g[static_cast<size_t>(k - i)];
                    g[static_cast<size_t>(k)] = -acc / a0;
                }
                GenLaurentSeries rs;
                rs.mu = 0;
                rs.N = 0;
                rs.a = std::move(g);
                rs.top = avail;
                GenLaurentElement rec;
                rec.comp[Rational(0)] = std::move(rs);
                rec.normalize();
                GenLaurentElement r = element_mul(GenLaurentElement::monomial(1, -lead), rec);
                r = element_truncate(r, upto);
                for (auto& [mu2, s2] : r.comp) s2.radius.reset();
                r.normalize();
                return r;
            }
        }
    }

    // 1/u = m * sum_m (-w)^m, truncated at the requested exponent
    GenLaurentElement acc = GenLaurentElement::monomial(1, 0);
    GenLaurentElement term = GenLaurentElement::monomial(1, 0);
    GenLaurentElement neg_w = -w;
    const Rational cutoff = upto + lead_e;
    for (;;) {
        term = element_mul(term, neg_w);
        term.normalize();
        bool known_part = false;
        Rational ord;
        for (const auto& [mu, s] : term.comp) {
            if (s.a.empty()) continue;
            Rational e = Rational(s.N) + mu;
            if (!known_part || e < ord) {
                known_part = true;
                ord = e;
            }
        }
        acc = acc + term;
        if (!known_part) break;          // window exhausted (or exact zero)
        if (ord > cutoff) break;         // further powers land beyond the cap
    }

    GenLaurentElement r = element_mul(m, acc);
    r = element_truncate(r, upto);
    for (auto& [mu, s] : r.comp) s.radius.reset(); // zeros of u are not located
    r.normalize();
    return r;
}

GenLaurentElement element_div(const GenLaurentElement& a, const GenLaurentElement& b,
                              const Rational& upto) {
    GenLaurentElement an = a;
    an.normalize();
    if (an.is_zero() && an.is_exact()) return GenLaurentElement::zero();

    // the inverse needs to reach far enough that a*inv is known through upto
    Rational ao = 0;
    bool have = false;
    for (const auto& [mu, s] : an.comp) {
        if (s.a.empty()) continue;
        Rational e = Rational(s.N) + mu;
        if (!have || e < ao) {
            have = true;
            ao = e;
        }
    }
    GenLaurentElement inv = element_invert(b, upto - ao);
    return element_mul(an, inv);
}

} // namespace greenbp
