#include "greenbp/spaces.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <stdexcept>
#include <utility>

namespace greenbp {

namespace {

Rational binom_q(unsigned n, unsigned k) {
    if (k > n) return Rational(0);
    Rational r = 1;
    for (unsigned i = 0; i < k; ++i) r = r * Rational(n - i) / Rational(i + 1);
    return r;
}

// xi^e with rational e; ExactnessLost when the value is irrational
Rational pow_exact(const Rational& xi, const Rational& e) {
    if (rat_is_integer(e)) return rat_pow(xi, rat_to_long(e));
    return laurent_poly_eval(GenLaurentPoly::monomial(1, e), xi);
}

// coefficientwise inner product <x^a, x^b> = delta_ab
Rational poly_dot(const GenLaurentPoly& a, const GenLaurentPoly& b) {
    Rational s = 0;
    for (const auto& [e, c] : a.t) {
        auto it = b.t.find(e);
        if (it != b.t.end()) s += c * it->second;
    }
    return s;
}

// value linear in the free parameters and the tail samples
struct LinExpr {
    std::vector<Rational> v; // free parameters (grows as rounds adjoin new ones)
    std::vector<Rational> b; // tail samples, fixed universe
};

void expr_axpy(LinExpr& dst, const Rational& c, const LinExpr& src) {
    if (c == 0) return;
    if (src.v.size() > dst.v.size()) dst.v.resize(src.v.size(), Rational(0));
    for (size_t i = 0; i < src.v.size(); ++i) dst.v[i] += c * src.v[i];
    for (size_t i = 0; i < src.b.size(); ++i) dst.b[i] += c * src.b[i];
}

// the part of a class series at exponents >= j (+mu), window bookkeeping kept
GenLaurentSeries series_tail(GenLaurentSeries t, long j) {
    if (t.N >= j) return t;
    if (t.top && *t.top <= j) {
        // everything known lies below the tail: nothing known from j on
        t.a.clear();
        t.N = j;
        t.top = j;
        return t;
    }
    size_t drop = static_cast<size_t>(j - t.N);
    t.a.erase(t.a.begin(), t.a.begin() + std::min(drop, t.a.size()));
    t.N = j;
    return t;
}

} // namespace

const AdmissibleComponent* AdmissibleSpaceRepr::find(const Rational& mu) const {
    for (const auto& c : comps)
        if (c.mu == mu) return &c;
    return nullptr;
}

AdmissibleSpaceRepr admissible_space(const FuchsianOperator& op, const BoundarySpace& space,
                                     const FundamentalSystem& fs, long trunc) {
    if (space.regular_count > space.finite_part.size())
        throw std::invalid_argument("regular_count exceeds the finite part");
    std::vector<BoundaryFunctional> block(
        space.finite_part.begin(), space.finite_part.begin() + (long)space.regular_count);
    if (!regularity_check(block, fs))
        throw NotSemiRegular("the regular block does not separate the operator kernel");
    if (!semi_regularity_check(space, fs))
        throw NotSemiRegular("boundary space fails the semi-regularity rank check");

    IndicialData id = indicial_data(op);
    std::vector<Rational> M = id.mu_classes;
    std::sort(M.begin(), M.end());
    M.erase(std::unique(M.begin(), M.end()), M.end());

    std::map<Rational, long> klo, s;
    for (const Rational& mu : M) {
        auto kb = space.curb_bound(mu);
        if (!kb)
            throw std::invalid_argument("no curbing family for ramification class " +
                                        rat_to_string(mu));
        klo[mu] = *kb;
        s[mu] = *kb - 1;
    }
    for (const auto& beta : space.finite_part)
        for (const auto& t : beta.terms)
            if (t.base.kind == Functional::Coeff && klo.count(t.base.mu) &&
                t.base.k >= klo[t.base.mu])
                s[t.base.mu] = std::max(s[t.base.mu], t.base.k);

    // evaluation points with the maximal derivative order each carries
    std::map<Rational, unsigned> xis;
    for (const auto& beta : space.finite_part)
        for (const auto& t : beta.terms)
            if (t.base.kind == Functional::PointEval) {
                auto [it, fresh] = xis.try_emplace(t.base.xi, t.base.deriv);
                if (!fresh) it->second = std::max(it->second, t.base.deriv);
            }

    // tail-sample universe b_mu^(j)(xi): class-major, then point, then order.
    // Per point the orders are contiguous from 0, which keeps every
    // interpolation block below nonsingular.
    struct BCol {
        Rational mu, xi;
        unsigned j;
    };
    std::vector<BCol> bcols;
    std::map<Rational, size_t> bbase;
    for (const Rational& mu : M) {
        bbase[mu] = bcols.size();
        for (const auto& [xi, d] : xis)
            for (unsigned j = 0; j <= d; ++j) bcols.push_back({mu, xi, j});
    }
    auto bindex = [&](const Rational& mu, const Rational& xi, unsigned j) -> size_t {
        size_t off = bbase.at(mu);
        for (const auto& [x, d] : xis) {
            if (x == xi) return off + j;
            off += d + 1;
        }
        throw std::logic_error("tail sample outside the universe");
    };

    // window columns a_{mu,k}, appended as elimination rounds extend windows
    struct ACol {
        Rational mu;
        long k;
    };
    std::vector<ACol> acols;
    std::map<Rational, std::map<long, size_t>> aidx;
    auto add_acol = [&](const Rational& mu, long k) {
        aidx[mu][k] = acols.size();
        acols.push_back({mu, k});
    };
    for (const Rational& mu : M)
        for (long k = klo[mu]; k <= s[mu]; ++k) add_acol(mu, k);

    // impose the finite part on the ansatz (windows plus one free tail per
    // class starting at x^{s_mu+1+mu}): rows  A·a = B·btail
    struct Row {
        std::vector<Rational> A, B;
    };
    std::vector<Row> rows;
    for (const auto& beta : space.finite_part) {
        Row r{std::vector<Rational>(acols.size(), Rational(0)),
              std::vector<Rational>(bcols.size(), Rational(0))};
        for (const auto& t : beta.terms) {
            if (t.base.kind == Functional::Coeff) {
                if (!klo.count(t.base.mu) || t.base.k < klo[t.base.mu])
                    continue; // reads a coefficient pinned to zero
                r.A[aidx[t.base.mu][t.base.k]] += t.coeff;
            } else { // PointEval(xi, l)
                const Rational& xi = t.base.xi;
                unsigned l = t.base.deriv;
                for (const Rational& mu : M) {
                    for (long k = klo[mu]; k <= s[mu]; ++k) {
                        Rational e = Rational(k) + mu;
                        Rational val = falling_factorial(e, l);
                        if (val == 0) continue;
                        val = val * pow_exact(xi, e - Rational((long)l));
                        r.A[aidx[mu][k]] += t.coeff * val;
                    }
                    // d^l/dx^l [x^r b(x)] at xi, r the tail leading exponent
                    Rational rmu = Rational(s[mu] + 1) + mu;
                    for (unsigned m = 0; m <= l; ++m) {
                        Rational c = binom_q(l, m) * falling_factorial(rmu, l - m);
                        if (c == 0) continue;
                        c = c * pow_exact(xi, rmu - Rational((long)(l - m)));
                        r.B[bindex(mu, xi, m)] -= t.coeff * c;
                    }
                }
            }
        }
        rows.push_back(std::move(r));
    }

    // row reduction with pivots restricted to the window columns; the tail
    // side is carried along, never pivoted
    size_t rr = 0;
    std::vector<std::pair<size_t, size_t>> piv;
    for (size_t c = 0; c < acols.size() && rr < rows.size(); ++c) {
        size_t sel = rows.size();
        for (size_t i = rr; i < rows.size(); ++i)
            if (rows[i].A[c] != 0) {
                sel = i;
                break;
            }
        if (sel == rows.size()) continue;
        std::swap(rows[rr], rows[sel]);
        Rational pv = rows[rr].A[c];
        for (auto& x : rows[rr].A) x = x / pv;
        for (auto& x : rows[rr].B) x = x / pv;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (i == rr) continue;
            Rational f = rows[i].A[c];
            if (f == 0) continue;
            for (size_t m = 0; m < acols.size(); ++m) rows[i].A[m] -= f * rows[rr].A[m];
            for (size_t m = 0; m < bcols.size(); ++m) rows[i].B[m] -= f * rows[rr].B[m];
        }
        piv.push_back({rr, c});
        ++rr;
    }

    // solved form: every window coefficient as a LinExpr in the free
    // parameters and the tail samples
    std::vector<LinExpr> expr(acols.size());
    size_t V = 0;
    {
        std::vector<long> pivot_of(acols.size(), -1);
        for (auto [r, c] : piv) pivot_of[c] = (long)r;
        std::vector<long> param_of(acols.size(), -1);
        for (size_t c = 0; c < acols.size(); ++c)
            if (pivot_of[c] < 0) param_of[c] = (long)V++;
        for (size_t c = 0; c < acols.size(); ++c) {
            expr[c].v.assign(V, Rational(0));
            expr[c].b.assign(bcols.size(), Rational(0));
            if (param_of[c] >= 0) expr[c].v[param_of[c]] = 1;
        }
        for (auto [r, c] : piv) {
            for (size_t m = 0; m < acols.size(); ++m)
                if (param_of[m] >= 0 && rows[r].A[m] != 0)
                    expr[c].v[param_of[m]] = -rows[r].A[m];
            expr[c].b = rows[r].B;
        }
    }

    // rows with no window part left are pure constraints on the tails
    std::vector<std::vector<Rational>> cons;
    for (size_t i = rr; i < rows.size(); ++i) {
        bool nz = false;
        for (const auto& x : rows[i].B)
            if (x != 0) {
                nz = true;
                break;
            }
        if (nz) cons.push_back(rows[i].B);
    }

    // Clear the tail constraints class by class, smallest first.  Each round
    // solves the constraint block for the samples of that class (free samples
    // become fresh parameters), then trades the Y sample equations for the Y
    // lowest coefficients of the class tail via a Hermite interpolation
    // solve; the remaining tail restarts Y exponents higher.  Constraints
    // never re-enter a cleared class, so this terminates.
    size_t round = 0;
    while (!cons.empty()) {
        if (++round > M.size() + 1)
            throw std::logic_error("tail constraint elimination did not terminate");

        Rational muP;
        bool found = false;
        for (const auto& row : cons)
            for (size_t c = 0; c < bcols.size(); ++c)
                if (row[c] != 0 && (!found || bcols[c].mu < muP)) {
                    muP = bcols[c].mu;
                    found = true;
                }
        if (!found) break;

        std::vector<size_t> own;
        for (size_t c = 0; c < bcols.size(); ++c)
            if (bcols[c].mu == muP) own.push_back(c);
        const size_t Y = own.size();

        // reduce the constraint block on the own columns
        size_t cr = 0;
        std::vector<long> own_pivot_row(Y, -1);
        for (size_t t = 0; t < Y && cr < cons.size(); ++t) {
            size_t col = own[t];
            size_t sel = cons.size();
            for (size_t i = cr; i < cons.size(); ++i)
                if (cons[i][col] != 0) {
                    sel = i;
                    break;
                }
            if (sel == cons.size()) continue;
            std::swap(cons[cr], cons[sel]);
            Rational pv = cons[cr][col];
            for (auto& x : cons[cr]) x = x / pv;
            for (size_t i = 0; i < cons.size(); ++i) {
                if (i == cr) continue;
                Rational f = cons[i][col];
                if (f == 0) continue;
                for (size_t m = 0; m < bcols.size(); ++m) cons[i][m] -= f * cons[cr][m];
            }
            own_pivot_row[t] = (long)cr;
            ++cr;
        }

        std::vector<long> own_param(Y, -1);
        for (size_t t = 0; t < Y; ++t)
            if (own_pivot_row[t] < 0) own_param[t] = (long)V++;

        // determining expression for each sample of the class (free samples
        // are the fresh parameters; pivot samples resolve against the rest)
        std::vector<LinExpr> det(Y);
        for (size_t t = 0; t < Y; ++t) {
            det[t].v.assign(V, Rational(0));
            det[t].b.assign(bcols.size(), Rational(0));
            if (own_param[t] >= 0) {
                det[t].v[own_param[t]] = 1;
                continue;
            }
            const auto& row = cons[own_pivot_row[t]];
            for (size_t t2 = 0; t2 < Y; ++t2) {
                if (t2 == t || row[own[t2]] == 0) continue;
                if (own_param[t2] < 0)
                    throw std::logic_error("pivot sample left in a reduced constraint row");
                det[t].v[own_param[t2]] = -row[own[t2]];
            }
            for (size_t c = 0; c < bcols.size(); ++c)
                if (bcols[c].mu != muP && row[c] != 0) det[t].b[c] = -row[c];
        }

        // constraints without a pivot in this class carry over
        std::vector<std::vector<Rational>> next;
        for (size_t i = cr; i < cons.size(); ++i) {
            bool nz = false;
            for (const auto& x : cons[i])
                if (x != 0) {
                    nz = true;
                    break;
                }
            if (nz) next.push_back(std::move(cons[i]));
        }

        // substitute the determined samples into the window table
        for (auto& e : expr) {
            e.v.resize(V, Rational(0));
            for (size_t t = 0; t < Y; ++t) {
                Rational c = e.b[own[t]];
                if (c == 0) continue;
                e.b[own[t]] = 0;
                expr_axpy(e, c, det[t]);
            }
        }

        // Hermite solve: write the old tail as Y fixed coefficients plus a
        // tail shifted up by Y, and solve the sample equations for those
        // coefficients.  H is the confluent interpolation matrix, always
        // invertible for contiguous orders per point.
        Mat H(Y, Y);
        for (size_t t = 0; t < Y; ++t) {
            const BCol& bc = bcols[own[t]];
            for (size_t k = 0; k < Y; ++k) {
                Rational f = falling_factorial(Rational((long)k), bc.j);
                if (f == 0) continue;
                H.at(t, k) = f * rat_pow(bc.xi, (long)k - (long)bc.j);
            }
        }
        auto Hinv = inverse(H);
        if (!Hinv) throw std::logic_error("degenerate tail interpolation system");

        std::vector<LinExpr> rhs(Y);
        for (size_t t = 0; t < Y; ++t) {
            rhs[t] = det[t];
            const BCol& bc = bcols[own[t]];
            for (unsigned i = 0; i <= bc.j; ++i) {
                Rational c = binom_q(bc.j, i) * falling_factorial(Rational((long)Y), bc.j - i);
                if (c == 0) continue;
                c = c * rat_pow(bc.xi, (long)Y - (long)bc.j + (long)i);
                // the shifted tail re-enters through the same sample slots
                rhs[t].b[bindex(muP, bc.xi, i)] -= c;
            }
        }

        long base = s[muP] + 1;
        if (base + (long)Y - 1 > trunc)
            throw TruncationExceeded("window for class " + rat_to_string(muP) +
                                     " exceeds the truncation order");
        for (size_t k = 0; k < Y; ++k) {
            LinExpr e;
            e.v.assign(V, Rational(0));
            e.b.assign(bcols.size(), Rational(0));
            for (size_t t = 0; t < Y; ++t) expr_axpy(e, Hinv->at(k, t), rhs[t]);
            add_acol(muP, base + (long)k);
            expr.push_back(std::move(e));
        }
        s[muP] = base + (long)Y - 1;
        cons = std::move(next);
    }

    for (auto& e : expr) e.v.resize(V, Rational(0));

    // each free parameter must stay inside one class, or there is no
    // direct-sum presentation to emit
    for (size_t p = 0; p < V; ++p) {
        const Rational* seen = nullptr;
        for (size_t c = 0; c < acols.size(); ++c) {
            if (expr[c].v[p] == 0) continue;
            if (!seen)
                seen = &acols[c].mu;
            else if (*seen != acols[c].mu)
                throw std::runtime_error(
                    "free parameter couples ramification classes " + rat_to_string(*seen) +
                    " and " + rat_to_string(acols[c].mu) + "; no classwise presentation exists");
        }
    }

    AdmissibleSpaceRepr repr;
    for (const Rational& mu : M) {
        AdmissibleComponent comp;
        comp.mu = mu;
        comp.k_lo = klo[mu];
        comp.j_tail = s[mu] + 1;
        const auto& cols = aidx[mu];

        // window basis: parameter columns restricted to this class, kept when
        // they extend the span (parameter order makes this deterministic)
        std::vector<std::vector<Rational>> kept;
        for (size_t p = 0; p < V; ++p) {
            GenLaurentPoly poly;
            std::vector<Rational> dense;
            dense.reserve(cols.size());
            for (const auto& [k, c] : cols) {
                dense.push_back(expr[c].v[p]);
                if (expr[c].v[p] != 0)
                    poly += GenLaurentPoly::monomial(expr[c].v[p], Rational(k) + mu);
            }
            if (poly.is_zero()) continue;
            Mat probe(kept.size() + 1, cols.size());
            for (size_t i = 0; i < kept.size(); ++i)
                for (size_t j = 0; j < cols.size(); ++j) probe.at(i, j) = kept[i][j];
            for (size_t j = 0; j < cols.size(); ++j) probe.at(kept.size(), j) = dense[j];
            if (rank(probe) != kept.size() + 1) continue;
            kept.push_back(std::move(dense));
            comp.basis.push_back(std::move(poly));
        }
        for (const auto& b : comp.basis) {
            GenLaurentPoly g = b;
            for (const auto& o : comp.ortho) {
                Rational c = poly_dot(o, g) / poly_dot(o, o);
                if (c != 0) g -= o.scaled(c);
            }
            if (g.is_zero()) throw std::logic_error("window basis degenerated");
            comp.ortho.push_back(g);
        }

        for (size_t c2 = 0; c2 < bcols.size(); ++c2) {
            GenLaurentPoly q;
            for (const auto& [k, col] : cols)
                if (expr[col].b[c2] != 0)
                    q += GenLaurentPoly::monomial(expr[col].b[c2], Rational(k) + mu);
            if (!q.is_zero())
                comp.couplings.push_back({bcols[c2].mu, bcols[c2].xi, bcols[c2].j, q});
        }
        repr.comps.push_back(std::move(comp));
    }
    return repr;
}

GenLaurentElement AdmissibleProjector::apply_raw(const GenLaurentElement& f) const {
    // shifted tails b_mu = x^{-j_tail-mu} * (class tail), exponent-aligned to
    // an analytic series so the coupling samples stay rational
    std::map<Rational, GenLaurentElement> shifted;
    for (const auto& comp : repr.comps) {
        GenLaurentElement e = GenLaurentElement::zero();
        auto it = f.comp.find(comp.mu);
        if (it != f.comp.end()) {
            GenLaurentSeries t = series_tail(it->second, comp.j_tail);
            t.mu = 0;
            t.N -= comp.j_tail;
            if (t.top) *t.top -= comp.j_tail;
            e.comp[Rational(0)] = std::move(t);
            e.normalize();
        }
        shifted[comp.mu] = std::move(e);
    }

    GenLaurentElement out = GenLaurentElement::zero();
    for (const auto& comp : repr.comps) {
        GenLaurentPoly cp;
        for (const auto& c : comp.couplings) {
            Rational val = apply_functional_to_element(Functional::point_eval(c.xi, c.deriv),
                                                       shifted.at(c.nu));
            if (val != 0) cp += c.q.scaled(val);
        }

        auto it = f.comp.find(comp.mu);
        GenLaurentPoly win;
        if (it != f.comp.end())
            for (long k = comp.k_lo; k < comp.j_tail; ++k) {
                Rational c = it->second.coeff(k);
                if (c != 0) win += GenLaurentPoly::monomial(c, Rational(k) + comp.mu);
            }

        // project the coupling-free window part onto the basis, then restore
        // the coupling reconstruction and the free tail
        GenLaurentPoly arg = win - cp;
        GenLaurentPoly rpart;
        for (const auto& o : comp.ortho) {
            Rational c = poly_dot(o, arg) / poly_dot(o, o);
            if (c != 0) rpart += o.scaled(c);
        }

        GenLaurentElement piece = GenLaurentElement::from_laurent_poly(rpart + cp);
        if (it != f.comp.end()) {
            GenLaurentSeries tl = series_tail(it->second, comp.j_tail);
            if (!tl.a.empty() || tl.top) {
                GenLaurentElement te;
                te.comp[comp.mu] = std::move(tl);
                piece = element_add(piece, te);
            }
        }
        out = element_add(out, piece);
    }
    out.normalize();
    return out;
}

GenLaurentElement AdmissibleProjector::apply(const GenLaurentElement& f) const {
    GenLaurentElement h = apply_raw(f);
    if (!corrected) return h;
    const size_t n = duals.size();
    for (size_t i = 0; i < n; ++i) {
        if (kernel_images[i].is_zero()) continue;
        Rational c = apply_functional(duals[i], f);
        if (c != 0) h = element_sub(h, element_scalar(kernel_images[i], c));
    }
    std::vector<Rational> bh(n, Rational(0));
    for (size_t j = 0; j < n; ++j) bh[j] = apply_functional(duals[j], h);
    for (size_t i = 0; i < n; ++i) {
        if (kernel_images[i].is_zero()) continue;
        Rational c = 0;
        for (size_t j = 0; j < n; ++j) c += woodbury.at(i, j) * bh[j];
        if (c != 0) h = element_add(h, element_scalar(kernel_images[i], c));
    }
    h.normalize();
    return h;
}

AdmissibleProjector admissible_projector(const AdmissibleSpaceRepr& repr,
                                         const FundamentalSystem& fs,
                                         const std::vector<BoundaryFunctional>& block) {
    AdmissibleProjector P;
    P.repr = repr;
    P.duals = dual_functionals(fs, block);
    const size_t n = fs.u.size();
    bool any = false;
    P.kernel_images.reserve(n);
    for (const auto& u : fs.u) {
        GenLaurentElement g = P.apply_raw(u);
        g.normalize();
        if (!g.is_zero()) any = true;
        P.kernel_images.push_back(std::move(g));
    }
    P.corrected = any;
    P.woodbury = Mat::identity(n);
    if (any) {
        // (I - B)^{-1} with B_ij = beta~_i(g_j): the finite-rank fix that
        // turns "projects onto the space" into "and kills the kernel too"
        Mat ImB = Mat::identity(n);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j)
                ImB.at(i, j) -= apply_functional(P.duals[i], P.kernel_images[j]);
        auto inv = inverse(ImB);
        if (!inv)
            throw std::runtime_error("kernel correction is degenerate for this boundary space");
        P.woodbury = *inv;
    }
    return P;
}

namespace {

// The admissible projector as a closed operator.  The composition target is
// not the analytic input itself but the right-inverse image of it, which
// carries poles; read_floor is a certified lower bound on their exponents, so
// that the window/tail extractions below see the genuine sub-series.  Reads
// below the actual pole depth compose into functionals of the analytic input
// that vanish under the final restriction, so overshooting is harmless.
IntDiffOperator projector_analytic_form(const AdmissibleProjector& P, long read_floor) {
    IntDiffOperator pan = IntDiffOperator::zero();
    const AdmissibleComponent* c0 = P.repr.find(Rational(0));
    if (c0) {
        read_floor = std::min(read_floor, c0->k_lo);
        IntDiffOperator reads_all = IntDiffOperator::zero();
        for (long k = read_floor; k < c0->j_tail; ++k)
            reads_all = reads_all + IntDiffOperator::rank_one(GenLaurentPoly::monomial(1, k),
                                                              Functional::coefficient(k));
        IntDiffOperator tail = IntDiffOperator::identity() - reads_all;
        IntDiffOperator shift_tail = normalize_compose(
            IntDiffOperator::multiplication(GenLaurentPoly::monomial(1, -c0->j_tail)), tail);

        IntDiffOperator window = IntDiffOperator::zero();
        for (long k = c0->k_lo; k < c0->j_tail; ++k)
            window = window + IntDiffOperator::rank_one(GenLaurentPoly::monomial(1, k),
                                                        Functional::coefficient(k));

        // couplings sourced from the analytic tail (other sources vanish on
        // analytic inputs), targeting any class
        IntDiffOperator cp0 = IntDiffOperator::zero();
        for (const auto& comp : P.repr.comps)
            for (const auto& c : comp.couplings) {
                if (c.nu != 0) continue;
                IntDiffOperator term = normalize_compose(
                    IntDiffOperator::rank_one(c.q, Functional::point_eval(c.xi, c.deriv)),
                    shift_tail);
                pan = pan + term;
                if (comp.mu == 0) cp0 = cp0 + term;
            }

        IntDiffOperator arg = normalize(window - cp0);
        for (const auto& o : c0->ortho) {
            Rational nn = poly_dot(o, o);
            IntDiffOperator read = IntDiffOperator::zero();
            for (const auto& [e, ce] : o.t)
                read = read + IntDiffOperator::rank_one(
                                  o.scaled(ce / nn), Functional::coefficient(rat_to_long(e)));
            pan = pan + normalize_compose(read, arg);
        }
        pan = pan + tail;
    }
    pan = normalize(pan);
    if (!P.corrected) return pan;

    // (1 + sum_ij g_i M_ij beta~_j) ∘ (pan - sum_i g_i beta~_i); needs the
    // kernel images in closed form
    const size_t n = P.duals.size();
    std::vector<GenLaurentPoly> g(n);
    for (size_t i = 0; i < n; ++i) g[i] = P.kernel_images[i].to_laurent_poly();
    IntDiffOperator inner = pan;
    for (size_t i = 0; i < n; ++i)
        for (const auto& t : P.duals[i].terms)
            inner = inner - IntDiffOperator::rank_one(g[i].scaled(t.coeff), t.base);
    inner = normalize(inner);
    IntDiffOperator out = inner;
    for (size_t i = 0; i < n; ++i) {
        if (g[i].is_zero()) continue;
        for (size_t j = 0; j < n; ++j) {
            Rational m = P.woodbury.at(i, j);
            if (m == 0) continue;
            for (const auto& t : P.duals[j].terms)
                out = out + normalize_compose(
                                IntDiffOperator::rank_one(g[i].scaled(m * t.coeff), t.base),
                                inner);
        }
    }
    return normalize(out);
}

} // namespace

AccessibleProjector accessible_projector(const FuchsianOperator& op, AdmissibleProjector P,
                                         const FundamentalSystem& fs, long trunc) {
    AccessibleProjector Q;
    Q.op = op;
    Q.fs = fs;
    Q.tails = variation_tails(op, fs, Rational(trunc));
    Q.P = std::move(P);
    try {
        IntDiffOperator T = operator_as_intdiff(op);
        IntDiffOperator tdia = fundamental_right_inverse(op, fs);

        // The closed form treats class-0 content by coefficient reads; kernel
        // solutions straddling ramification classes would leak through the
        // point-evaluation samples, so fall back to the lazy projector there.
        bool cross = false;
        for (const auto& ue : fs.u)
            for (const auto& [m, s] : ue.comp)
                if (m != 0 && (!s.a.empty() || s.top)) cross = true;
        if (cross && (Q.P.repr.find(Rational(0)) || Q.P.corrected))
            throw ExactnessLost("kernel mixes ramification classes");

        // lowest class-0 exponent the right-inverse image of an analytic
        // input can carry, so the closed projector subtracts every pole
        long floor = 0;
        for (const auto& it : tdia.integral)
            if (!it.left.t.empty() && !it.right.t.empty())
                floor = std::min(floor, rat_floor(it.left.order()) +
                                            std::min(0L, rat_floor(it.right.order()) + 1));
        for (const auto& bt : tdia.bdry)
            if (!bt.left.t.empty()) floor = std::min(floor, rat_floor(bt.left.order()));
        for (const auto& dt : tdia.diff)
            if (!dt.coeff.t.empty()) floor = std::min(floor, rat_floor(dt.coeff.order()));

        IntDiffOperator pan = projector_analytic_form(Q.P, floor);
        Q.analytic_form = restrict_to_analytic(normalize_compose(T, normalize_compose(pan, tdia)));
    } catch (const ExactnessLost&) {
        Q.analytic_form.reset();
    } catch (const TruncationExceeded&) {
        Q.analytic_form.reset();
    }
    return Q;
}

GenLaurentElement AccessibleProjector::apply(const GenLaurentElement& f) const {
    // right inverse with residues dropped into the (discarded) log layer: the
    // dropped parts are kernel multiples, which P annihilates anyway
    LogElement lifted = apply_right_inverse_log(fs, tails, f);
    GenLaurentElement u = P.apply(lifted.base);
    return apply_operator(op, u);
}

ExceptionalDescription exceptional_space(const AccessibleProjector& Q, long trunc) {
    ExceptionalDescription out;
    for (const auto& comp : Q.P.repr.comps) {
        long lo = comp.k_lo - (long)Q.op.n - 3;
        long hi = std::min(comp.j_tail + 2, trunc);
        long kmax = lo - 1;
        bool run = true; // still extending the annihilated bottom family
        for (long k = lo; k <= hi; ++k) {
            GenLaurentElement probe = GenLaurentElement::monomial(1, Rational(k) + comp.mu);
            GenLaurentElement img;
            try {
                img = Q.apply(probe);
            } catch (const TruncationExceeded&) {
                run = false;
                continue;
            }
            if (img.is_zero()) {
                if (run) kmax = k;
                continue;
            }
            run = false;
            GenLaurentElement left = element_sub(probe, img);
            left.normalize();
            if (!left.is_zero()) out.generators.push_back(std::move(left));
        }
        if (kmax >= lo) out.families.push_back({comp.mu, kmax, lo});
    }
    return out;
}

IntDiffOperator greens_operator(const FuchsianOperator& op, const BoundarySpace& space,
                                const FundamentalSystem& fs, long trunc) {
    std::vector<BoundaryFunctional> block(
        space.finite_part.begin(), space.finite_part.begin() + (long)space.regular_count);
    AdmissibleSpaceRepr repr = admissible_space(op, space, fs, trunc);
    AdmissibleProjector P = admissible_projector(repr, fs, block);
    AccessibleProjector Q = accessible_projector(op, std::move(P), fs, trunc);
    if (!Q.analytic_form)
        throw ExactnessLost("closed-form Green's operator needs exact operator and kernel data");
    IntDiffOperator tdia = fundamental_right_inverse(op, fs);
    IntDiffOperator pker = kernel_projector(fs, block);
    IntDiffOperator gtilde = normalize_compose(IntDiffOperator::identity() - pker, tdia);
    return restrict_to_analytic(normalize_compose(gtilde, *Q.analytic_form));
}

namespace {

nlohmann::json poly_json(const GenLaurentPoly& p) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [e, c] : p.t)
        terms.push_back({{"coeff", rat_to_string(c)}, {"exp", rat_to_string(e)}});
    return terms;
}

} // namespace

std::string admissible_space_to_json(const AdmissibleSpaceRepr& repr) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& comp : repr.comps) {
        nlohmann::json couplings = nlohmann::json::array();
        for (const auto& c : comp.couplings)
            couplings.push_back({{"source_mu", rat_to_string(c.nu)},
                                 {"point", rat_to_string(c.xi)},
                                 {"deriv", c.deriv},
                                 {"q", poly_json(c.q)}});
        nlohmann::json basis = nlohmann::json::array();
        for (const auto& b : comp.basis) basis.push_back(poly_json(b));
        classes.push_back({{"mu", rat_to_string(comp.mu)},
                           {"k_lo", comp.k_lo},
                           {"j_tail", comp.j_tail},
                           {"basis", basis},
                           {"couplings", couplings}});
    }
    return nlohmann::json{{"classes", classes}}.dump();
}

std::string exceptional_to_json(const ExceptionalDescription& e) {
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& f : e.families)
        fams.push_back({{"mu", rat_to_string(f.mu)},
                        {"k_max", f.k_max},
                        {"verified_down_to", f.verified_down_to}});
    nlohmann::json gens = nlohmann::json::array();
    for (const auto& g : e.generators) gens.push_back(g.to_string());
    return nlohmann::json{{"families", fams}, {"generators", gens}}.dump();
}

} // namespace greenbp
