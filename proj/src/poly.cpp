#include "greenbp/poly.hpp"

#include <algorithm>
#include <sstream>

namespace greenbp {

Poly Poly::monomial(Rational coeff, size_t deg) {
    Poly p;
    if (coeff == 0) return p;
    p.c.assign(deg + 1, Rational(0));
    p.c[deg] = std::move(coeff);
    return p;
}

void Poly::trim() {
    while (!c.empty() && c.back() == 0) c.pop_back();
}

Poly Poly::operator-() const {
    Poly r = *this;
    for (auto& v : r.c) v = -v;
    return r;
}

Poly& Poly::operator+=(const Poly& o) {
    if (o.c.size() > c.size()) c.resize(o.c.size(), Rational(0));
    for (size_t i = 0; i < o.c.size(); ++i) c[i] += o.c[i];
    trim();
    return *this;
}

Poly& Poly::operator-=(const Poly& o) {
    if (o.c.size() > c.size()) c.resize(o.c.size(), Rational(0));
    for (size_t i = 0; i < o.c.size(); ++i) c[i] -= o.c[i];
    trim();
    return *this;
}

Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return Poly();
    Poly r;
    r.c.assign(a.c.size() + b.c.size() - 1, Rational(0));
    for (size_t i = 0; i < a.c.size(); ++i) {
        if (a.c[i] == 0) continue;
        for (size_t j = 0; j < b.c.size(); ++j) {
            if (b.c[j] == 0) continue;
            r.c[i + j] += a.c[i] * b.c[j];
        }
    }
    r.trim();
    return r;
}

Poly& Poly::operator*=(const Rational& s) {
    if (s == 0) { c.clear(); return *this; }
    for (auto& v : c) v *= s;
    return *this;
}

Rational Poly::eval(const Rational& x) const {
    Rational acc = 0;
    for (size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
    return acc;
}

Poly Poly::derivative() const {
    Poly r;
    if (c.size() <= 1) return r;
    r.c.resize(c.size() - 1);
    for (size_t i = 1; i < c.size(); ++i) r.c[i - 1] = c[i] * Rational(i);
    r.trim();
    return r;
}

Poly Poly::pow(unsigned e) const {
    Poly acc(Rational(1)), base = *this;
    while (e) {
        if (e & 1) acc *= base;
        if (e >>= 1) base *= base;
    }
    return acc;
}

Poly Poly::compose_scale(const Rational& s) const {
    Poly r = *this;
    Rational p(1);
    for (size_t i = 0; i < r.c.size(); ++i) {
        r.c[i] *= p;
        p *= s;
    }
    r.trim();
    return r;
}

std::string Poly::to_string(const std::string& var) const {
    if (is_zero()) return "0";
    std::ostringstream os;
    bool first = true;
    for (size_t i = c.size(); i-- > 0;) {
        if (c[i] == 0) continue;
        Rational a = c[i];
        if (first) {
            if (a < 0) { os << "-"; a = -a; }
        } else {
            os << (a < 0 ? " - " : " + ");
            if (a < 0) a = -a;
        }
        first = false;
        bool unit = (a == 1) && i > 0;
        if (!unit) os << rat_to_string(a);
        if (i > 0) {
            if (!unit) os << "*";
            os << var;
            if (i > 1) os << "^" << i;
        }
    }
    return os.str();
}

std::pair<Poly, Poly> poly_divmod(const Poly& a, const Poly& b) {
    if (b.is_zero()) throw std::domain_error("polynomial division by zero");
    Poly q, r = a;
    long db = b.degree();
    if (r.degree() >= db) q.c.assign(r.degree() - db + 1, Rational(0));
    while (!r.is_zero() && r.degree() >= db) {
        long k = r.degree() - db;
        Rational f = r.lc() / b.lc();
        q.c[k] = f;
        for (long i = 0; i <= db; ++i) r.c[k + i] -= f * b.c[i];
        r.trim();
    }
    q.trim();
    return {q, r};
}

Poly poly_gcd(Poly a, Poly b) {
    while (!b.is_zero()) {
        Poly r = poly_divmod(a, b).second;
        a = std::move(b);
        b = std::move(r);
    }
    if (!a.is_zero() && a.lc() != 1) a *= Rational(1) / a.lc();
    return a;
}

void RationalFunction::reduce() {
    if (den.is_zero()) throw std::domain_error("zero denominator");
    if (num.is_zero()) { den = Poly(Rational(1)); return; }
    Poly g = poly_gcd(num, den);
    if (g.degree() > 0) {
        num = poly_divmod(num, g).first;
        den = poly_divmod(den, g).first;
    }
    Rational l = den.lc();
    if (l != 1) {
        den *= Rational(1) / l;
        num *= Rational(1) / l;
    }
}

RationalFunction operator+(const RationalFunction& a, const RationalFunction& b) {
    RationalFunction r{a.num * b.den + b.num * a.den, a.den * b.den};
    r.reduce();
    return r;
}

RationalFunction operator-(const RationalFunction& a, const RationalFunction& b) {
    RationalFunction r{a.num * b.den - b.num * a.den, a.den * b.den};
    r.reduce();
    return r;
}

RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    RationalFunction r{a.num * b.num, a.den * b.den};
    r.reduce();
    return r;
}

RationalFunction operator/(const RationalFunction& a, const RationalFunction& b) {
    if (b.is_zero()) throw std::domain_error("division by zero rational function");
    RationalFunction r{a.num * b.den, a.den * b.num};
    r.reduce();
    return r;
}

Rational RationalFunction::eval(const Rational& x) const {
    Rational d = den.eval(x);
    if (d == 0) throw std::domain_error("evaluation at a pole");
    return num.eval(x) / d;
}

RationalFunction RationalFunction::compose_scale(const Rational& s) const {
    RationalFunction r{num.compose_scale(s), den.compose_scale(s)};
    r.reduce();
    return r;
}

std::string RationalFunction::to_string(const std::string& var) const {
    if (is_polynomial()) return num.to_string(var);
    std::string n = num.to_string(var), d = den.to_string(var);
    auto wrap = [](const std::string& s) {
        // ^ binds tighter than / so a bare power needs no parentheses
        return s.find_first_of("+-* ") == std::string::npos ? s : "(" + s + ")";
    };
    return wrap(n) + "/" + wrap(d);
}

// sign variations in the Sturm chain evaluated at x
static int sturm_variations(const std::vector<Poly>& chain, const Rational& x) {
    int var = 0, prev = 0;
    for (const auto& p : chain) {
        Rational v = p.eval(x);
        int s = v == 0 ? 0 : (v < 0 ? -1 : 1);
        if (s != 0) {
            if (prev != 0 && s != prev) ++var;
            prev = s;
        }
    }
    return var;
}

int count_real_roots(const Poly& p, const Rational& lo, const Rational& hi) {
    if (p.is_zero()) throw std::domain_error("root count of zero polynomial");
    if (p.degree() == 0) return 0;
    // squarefree part so multiple roots count once and the chain is a proper
    // Sturm chain
    Poly sf = poly_divmod(p, poly_gcd(p, p.derivative())).first;
    std::vector<Poly> chain = {sf, sf.derivative()};
    while (!chain.back().is_zero()) {
        Poly r = poly_divmod(chain[chain.size() - 2], chain.back()).second;
        chain.push_back(-r);
    }
    chain.pop_back();
    return sturm_variations(chain, lo) - sturm_variations(chain, hi);
}

RationalRoots rational_roots(const Poly& p) {
    RationalRoots out;
    out.cofactor = p;
    if (p.is_zero() || p.degree() == 0) return out;

    // strip x^v
    size_t v = 0;
    while (v < out.cofactor.c.size() && out.cofactor.c[v] == 0) ++v;
    if (v > 0) {
        out.roots.emplace_back(Rational(0), static_cast<int>(v));
        out.cofactor.c.erase(out.cofactor.c.begin(), out.cofactor.c.begin() + v);
    }

    // integer-coefficient model: candidates are ±(divisors of a0)/(divisors of an)
    while (out.cofactor.degree() >= 1) {
        Int L(1);
        for (const auto& q : out.cofactor.c) L = boost::multiprecision::lcm(L, denom(q));
        std::vector<Int> ic;
        for (const auto& q : out.cofactor.c) ic.push_back(numer(q * Rational(L)));
        Int a0 = boost::multiprecision::abs(ic.front());
        Int an = boost::multiprecision::abs(ic.back());

        auto divisors = [](const Int& n) {
            std::vector<Int> d;
            for (Int i = 1; i * i <= n; ++i) {
                if (n % i == 0) {
                    d.push_back(i);
                    if (i * i != n) d.push_back(n / i);
                }
            }
            return d;
        };

        bool found = false;
        for (const Int& dp : divisors(a0)) {
            for (const Int& dq : divisors(an)) {
                for (int sign : {1, -1}) {
                    Rational cand(sign * dp, dq);
                    if (out.cofactor.eval(cand) == 0) {
                        int mult = 0;
                        while (out.cofactor.eval(cand) == 0) {
                            Poly lin(std::vector<Rational>{-cand, Rational(1)});
                            out.cofactor = poly_divmod(out.cofactor, lin).first;
                            ++mult;
                        }
                        out.roots.emplace_back(cand, mult);
                        found = true;
                        goto next_round;
                    }
                }
            }
        }
    next_round:
        if (!found) break;
    }
    std::sort(out.roots.begin(), out.roots.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

Rational root_modulus_lower_bound(const Poly& p) {
    if (p.is_zero() || p.coeff(0) == 0)
        throw std::domain_error("root modulus bound requires p(0) != 0");
    if (p.degree() == 0) throw std::domain_error("constant has no roots");
    Rational c0 = boost::multiprecision::abs(p.c[0]);
    Rational m = 0;
    for (size_t i = 1; i < p.c.size(); ++i)
        m = std::max(m, Rational(boost::multiprecision::abs(p.c[i])));
    return c0 / (c0 + m);
}

std::optional<Rational> expansion_radius(const Poly& den) {
    if (den.is_zero()) throw std::domain_error("expansion radius of zero denominator");
    RationalRoots rr = rational_roots(den);
    std::optional<Rational> best;
    for (const auto& [r, m] : rr.roots) {
        if (r == 0) continue; // the x^v factor is not a pole of the expansion
        Rational a = boost::multiprecision::abs(r);
        if (!best || a < *best) best = a;
    }
    if (rr.cofactor.degree() >= 1) {
        Rational b = root_modulus_lower_bound(rr.cofactor);
        if (!best || b < *best) best = b;
    }
    return best; // nullopt: den = c*x^v, the expansion is a Laurent polynomial tail-free
}

} // namespace greenbp
