#include "greenbp/boundary.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace greenbp {

namespace {

void check_base(const Functional& base) {
    if (base.kind == Functional::DefInt)
        throw std::invalid_argument("boundary functionals admit point evaluations and "
                                    "coefficient functionals only");
    if (base.kind == Functional::PointEval && (base.xi <= 0 || base.xi > 1))
        throw std::invalid_argument("evaluation point outside (0,1]");
}

} // namespace

BoundaryFunctional BoundaryFunctional::point_eval(const Rational& xi, unsigned deriv) {
    BoundaryFunctional b;
    b.terms.push_back({Rational(1), Functional::point_eval(xi, deriv)});
    check_base(b.terms.back().base);
    return b;
}

BoundaryFunctional BoundaryFunctional::coefficient(long k, const Rational& mu) {
    BoundaryFunctional b;
    b.terms.push_back({Rational(1), Functional::coefficient(k, mu)});
    return b;
}

BoundaryFunctional BoundaryFunctional::scaled(const Rational& s) const {
    BoundaryFunctional r;
    if (s == 0) return r;
    r.terms = terms;
    for (auto& t : r.terms) t.coeff *= s;
    return r;
}

BoundaryFunctional operator+(const BoundaryFunctional& a, const BoundaryFunctional& b) {
    BoundaryFunctional r;
    r.terms = a.terms;
    r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
    r.normalize();
    return r;
}

BoundaryFunctional operator-(const BoundaryFunctional& a, const BoundaryFunctional& b) {
    return a + b.scaled(-1);
}

void BoundaryFunctional::normalize() {
    for (const auto& t : terms) check_base(t.base);
    std::sort(terms.begin(), terms.end(),
              [](const Term& x, const Term& y) { return x.base < y.base; });
    std::vector<Term> merged;
    for (const auto& t : terms) {
        if (!merged.empty() && merged.back().base == t.base)
            merged.back().coeff += t.coeff;
        else
            merged.push_back(t);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Term& t) { return t.coeff == 0; }),
                 merged.end());
    terms = std::move(merged);
}

bool BoundaryFunctional::operator==(const BoundaryFunctional& o) const {
    if (terms.size() != o.terms.size()) return false;
    for (size_t i = 0; i < terms.size(); ++i)
        if (terms[i].coeff != o.terms[i].coeff || !(terms[i].base == o.terms[i].base))
            return false;
    return true;
}

std::string BoundaryFunctional::to_string() const {
    if (terms.empty()) return "0";
    std::string s;
    for (size_t i = 0; i < terms.size(); ++i) {
        if (i) s += " + ";
        if (terms[i].coeff != 1) s += rat_to_string(terms[i].coeff) + "*";
        s += terms[i].base.to_string();
    }
    return s;
}

Rational apply_functional(const BoundaryFunctional& beta, const GenLaurentElement& u) {
    Rational v = 0;
    for (const auto& t : beta.terms) v += t.coeff * apply_functional_to_element(t.base, u);
    return v;
}

Mat evaluation_matrix(const std::vector<BoundaryFunctional>& betas,
                      const std::vector<GenLaurentElement>& us) {
    Mat E(betas.size(), us.size());
    for (size_t i = 0; i < betas.size(); ++i)
        for (size_t j = 0; j < us.size(); ++j) E.at(i, j) = apply_functional(betas[i], us[j]);
    return E;
}

namespace {

// leading order of u as (class mu, integer offset k, coefficient).  An empty
// truncated window that could still hide a lower-order term makes the order
// uncertifiable: TruncationExceeded.
struct Leading {
    Rational mu;
    long k = 0;
    Rational c;
};

Leading leading_term(const GenLaurentElement& u) {
    std::optional<Rational> best;
    Leading lead;
    std::optional<Rational> unknown_floor;
    for (const auto& [mu, s] : u.comp) {
        bool found = false;
        for (size_t i = 0; i < s.a.size(); ++i) {
            if (s.a[i] != 0) {
                Rational e = mu + Rational(s.N + static_cast<long>(i));
                if (!best || e < *best) {
                    best = e;
                    lead = {mu, s.N + static_cast<long>(i), s.a[i]};
                }
                found = true;
                break;
            }
        }
        if (!found && !s.is_exact()) {
            Rational fl = mu + Rational(*s.top);
            if (!unknown_floor || fl < *unknown_floor) unknown_floor = fl;
        }
    }
    if (!best) {
        if (unknown_floor)
            throw TruncationExceeded("leading term hidden beyond the known window");
        throw WronskianDegenerate("zero element in a fundamental system");
    }
    if (unknown_floor && *unknown_floor <= *best)
        throw TruncationExceeded("leading term hidden beyond the known window");
    return lead;
}

} // namespace

CanonicalSystem canonical_functionals(const FundamentalSystem& fs) {
    size_t n = fs.u.size();
    if (n == 0) throw std::invalid_argument("empty fundamental system");

    std::vector<GenLaurentElement> us = fs.u;
    std::vector<Leading> lead(n);
    Rational wscale = 1;
    for (size_t i = 0; i < n; ++i) {
        lead[i] = leading_term(us[i]);
        if (lead[i].c != 1) { // make monic
            us[i] = us[i] * (Rational(1) / lead[i].c);
            wscale /= lead[i].c;
            lead[i].c = 1;
        }
    }

    auto order_of = [&](size_t i) { return lead[i].mu + Rational(lead[i].k); };
    auto sort_all = [&]() {
        for (size_t i = 0; i + 1 < n; ++i)
            for (size_t j = 0; j + 1 < n - i; ++j)
                if (order_of(j + 1) < order_of(j)) {
                    std::swap(us[j], us[j + 1]);
                    std::swap(lead[j], lead[j + 1]);
                    wscale = -wscale; // column swap in the Wronskian matrix
                }
    };
    sort_all();

    // tie-breaking: equal orders force equal classes, so the difference is
    // sensible; each round strictly raises one order
    for (int guard = 0; guard < 4096; ++guard) {
        size_t tie = n;
        for (size_t i = 0; i + 1 < n; ++i)
            if (order_of(i) == order_of(i + 1)) {
                tie = i;
                break;
            }
        if (tie == n) break;
        us[tie + 1] = us[tie + 1] - us[tie]; // determinant unchanged
        lead[tie + 1] = leading_term(us[tie + 1]);
        if (lead[tie + 1].c != 1) {
            us[tie + 1] = us[tie + 1] * (Rational(1) / lead[tie + 1].c);
            wscale /= lead[tie + 1].c;
            lead[tie + 1].c = 1;
        }
        sort_all();
    }
    for (size_t i = 0; i + 1 < n; ++i)
        if (!(order_of(i) < order_of(i + 1)))
            throw std::logic_error("tie-breaking failed to separate orders");

    CanonicalSystem cs;
    cs.fs.u = us;
    cs.fs.W = fs.W * wscale;
    cs.fs.roots.resize(n);
    for (size_t i = 0; i < n; ++i) {
        cs.fs.roots[i] = order_of(i);
        cs.betas.push_back(BoundaryFunctional::coefficient(lead[i].k, lead[i].mu));
    }
    cs.E = evaluation_matrix(cs.betas, cs.fs.u);
    return cs;
}

namespace {

// coordinates of a functional list on the symbolic term basis {c_{k+mu}} u
// {e_xi D^j}; faithful for the admitted class
Mat term_coordinates(const std::vector<BoundaryFunctional>& betas) {
    std::set<Functional> bases;
    for (const auto& b : betas)
        for (const auto& t : b.terms) bases.insert(t.base);
    std::vector<Functional> cols(bases.begin(), bases.end());
    Mat m(betas.size(), cols.size());
    for (size_t i = 0; i < betas.size(); ++i)
        for (const auto& t : betas[i].terms) {
            size_t j = std::lower_bound(cols.begin(), cols.end(), t.base) - cols.begin();
            m.at(i, j) = t.coeff;
        }
    return m;
}

} // namespace

BoundarySpace build_boundary_space(std::vector<BoundaryFunctional> betas,
                                   std::vector<CurbingFamily> curbing) {
    for (auto& b : betas) b.normalize();
    std::set<Rational> mus;
    for (const auto& f : curbing)
        if (!mus.insert(f.mu).second)
            throw std::invalid_argument("curbing families must be disjoint by class");
    if (!betas.empty() && rank(term_coordinates(betas)) != betas.size())
        throw std::invalid_argument("finite part of a boundary space must be independent");

    BoundarySpace s;
    s.finite_part = std::move(betas);
    s.regular_count = s.finite_part.size();
    s.pinned.assign(s.finite_part.size(), 0);
    std::sort(curbing.begin(), curbing.end(),
              [](const CurbingFamily& a, const CurbingFamily& b) { return a.mu < b.mu; });
    s.curbing = std::move(curbing);
    return s;
}

BoundarySpace build_boundary_space(const CanonicalSystem& cs) {
    std::map<Rational, long> kmu;
    for (const auto& b : cs.betas) {
        const auto& base = b.terms.at(0).base;
        auto it = kmu.find(base.mu);
        if (it == kmu.end() || base.k < it->second) kmu[base.mu] = base.k;
    }
    std::vector<CurbingFamily> curbing;
    for (const auto& [mu, k] : kmu) curbing.push_back({mu, k});
    return build_boundary_space(cs.betas, std::move(curbing));
}

std::optional<long> BoundarySpace::curb_bound(const Rational& mu) const {
    for (const auto& f : curbing)
        if (f.mu == mu) return f.k_mu;
    return std::nullopt;
}

bool BoundarySpace::in_curbing_span(const BoundaryFunctional& beta) const {
    for (const auto& t : beta.terms) {
        if (t.base.kind != Functional::Coeff) return false;
        auto bound = curb_bound(t.base.mu);
        if (!bound || t.base.k >= *bound) return false;
    }
    return true;
}

std::pair<BoundarySpace, ImposeOutcome> trade_or_annex(const BoundarySpace& space,
                                                       const BoundaryFunctional& beta,
                                                       const FundamentalSystem& fs) {
    BoundarySpace s = space;
    if (s.pinned.size() != s.finite_part.size()) s.pinned.assign(s.finite_part.size(), 0);
    size_t n = fs.u.size();
    if (s.regular_count != n)
        throw std::invalid_argument("regular block size must match the fundamental system");

    BoundaryFunctional b = beta;
    b.normalize();

    std::vector<Rational> r(n);
    bool nonzero = false;
    for (size_t j = 0; j < n; ++j) {
        r[j] = apply_functional(b, fs.u[j]);
        if (r[j] != 0) nonzero = true;
    }

    if (nonzero) {
        // expand r over the rows of the regular block's evaluation matrix
        std::vector<BoundaryFunctional> block(s.finite_part.begin(),
                                              s.finite_part.begin() + n);
        Mat E = evaluation_matrix(block, fs.u);
        Mat Et(n, n);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) Et.at(i, j) = E.at(j, i);
        auto c = solve(Et, r);
        if (!c)
            throw SingularEvaluationMatrix("regular block has a singular evaluation matrix");
        for (size_t j = n; j-- > 0;) {
            if ((*c)[j] != 0 && !s.pinned[j]) {
                s.finite_part[j] = b;
                s.pinned[j] = 1;
                return {std::move(s), ImposeOutcome{ImposeKind::Traded, j, false}};
            }
        }
        // the kernel action is carried entirely by pinned conditions; the
        // only faithful way to keep it is as an extra condition
    } else if (s.in_curbing_span(b)) {
        return {std::move(s), ImposeOutcome{ImposeKind::RedundantCurbing, 0, false}};
    }

    s.finite_part.push_back(b);
    s.pinned.push_back(1);
    return {std::move(s), ImposeOutcome{ImposeKind::Annexed, s.finite_part.size() - 1, true}};
}

bool regularity_check(const std::vector<BoundaryFunctional>& betas, const FundamentalSystem& fs) {
    return rank(evaluation_matrix(betas, fs.u)) == fs.u.size();
}

bool semi_regularity_check(const BoundarySpace& space, const FundamentalSystem& fs) {
    std::vector<BoundaryFunctional> rows = space.finite_part;
    // curbing rows on the window where kernel elements have support
    for (const auto& fam : space.curbing) {
        long kmin = fam.k_mu;
        for (const auto& u : fs.u) {
            auto it = u.comp.find(fam.mu);
            if (it != u.comp.end()) kmin = std::min(kmin, it->second.N);
        }
        for (long k = kmin; k < fam.k_mu; ++k)
            rows.push_back(BoundaryFunctional::coefficient(k, fam.mu));
    }
    return rank(evaluation_matrix(rows, fs.u)) == fs.u.size();
}

std::vector<BoundaryFunctional> dual_functionals(const FundamentalSystem& fs,
                                                 const std::vector<BoundaryFunctional>& betas) {
    size_t n = fs.u.size();
    if (betas.size() != n) throw std::invalid_argument("need as many functionals as solutions");
    auto inv = inverse(evaluation_matrix(betas, fs.u));
    if (!inv) throw SingularEvaluationMatrix("evaluation matrix is singular");
    std::vector<BoundaryFunctional> duals(n);
    for (size_t i = 0; i < n; ++i) {
        BoundaryFunctional d;
        for (size_t j = 0; j < n; ++j) {
            auto part = betas[j].scaled(inv->at(i, j));
            d.terms.insert(d.terms.end(), part.terms.begin(), part.terms.end());
        }
        d.normalize();
        duals[i] = std::move(d);
    }
    return duals;
}

IntDiffOperator kernel_projector(const FundamentalSystem& fs,
                                 const std::vector<BoundaryFunctional>& betas) {
    auto duals = dual_functionals(fs, betas);
    IntDiffOperator P;
    for (size_t i = 0; i < fs.u.size(); ++i) {
        GenLaurentPoly ui = fs.u[i].to_laurent_poly();
        for (const auto& t : duals[i].terms)
            P.bdry.push_back({ui.scaled(t.coeff), t.base, false, GenLaurentPoly::constant(1)});
    }
    return normalize(std::move(P));
}

namespace {

nlohmann::json functional_json(const BoundaryFunctional& beta) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : beta.terms) {
        nlohmann::json e;
        e["coeff"] = rat_to_string(t.coeff);
        if (t.base.kind == Functional::PointEval) {
            e["kind"] = "eval";
            e["point"] = rat_to_string(t.base.xi);
            e["deriv"] = t.base.deriv;
        } else {
            e["kind"] = "coeff";
            e["k"] = t.base.k;
            e["mu"] = rat_to_string(t.base.mu);
        }
        terms.push_back(e);
    }
    return nlohmann::json{{"terms", terms}};
}

} // namespace

std::string boundary_functional_to_json(const BoundaryFunctional& beta) {
    return functional_json(beta).dump();
}

std::string boundary_space_to_json(const BoundarySpace& space) {
    nlohmann::json j;
    j["finite_part"] = nlohmann::json::array();
    for (const auto& b : space.finite_part) j["finite_part"].push_back(functional_json(b));
    j["regular_count"] = space.regular_count;
    j["curbing"] = nlohmann::json::array();
    for (const auto& f : space.curbing)
        j["curbing"].push_back({{"mu", rat_to_string(f.mu)}, {"k_below", f.k_mu}});
    return j.dump();
}

} // namespace greenbp
