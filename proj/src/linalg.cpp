#include "greenbp/linalg.hpp"

#include <stdexcept>

namespace greenbp {

Mat Mat::identity(size_t n) {
    Mat m(n, n);
    for (size_t i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
}

Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matrix shape mismatch");
    Mat r(x.rows, y.cols);
    for (size_t i = 0; i < x.rows; ++i)
        for (size_t k = 0; k < x.cols; ++k) {
            if (x.at(i, k) == 0) continue;
            for (size_t j = 0; j < y.cols; ++j) r.at(i, j) += x.at(i, k) * y.at(k, j);
        }
    return r;
}

std::vector<size_t> rref_in_place(Mat& m) {
    std::vector<size_t> pivots;
    size_t row = 0;
    for (size_t col = 0; col < m.cols && row < m.rows; ++col) {
        size_t p = row;
        while (p < m.rows && m.at(p, col) == 0) ++p;
        if (p == m.rows) continue;
        if (p != row)
            for (size_t j = 0; j < m.cols; ++j) std::swap(m.at(p, j), m.at(row, j));
        // eliminate below without scaling the pivot row
        for (size_t i = row + 1; i < m.rows; ++i) {
            if (m.at(i, col) == 0) continue;
            Rational f = m.at(i, col) / m.at(row, col);
            for (size_t j = col; j < m.cols; ++j) m.at(i, j) -= f * m.at(row, j);
        }
        pivots.push_back(col);
        ++row;
    }
    // back-substitution and unit pivots
    for (size_t k = pivots.size(); k-- > 0;) {
        size_t col = pivots[k];
        Rational inv = Rational(1) / m.at(k, col);
        for (size_t j = col; j < m.cols; ++j) m.at(k, j) *= inv;
        for (size_t i = 0; i < k; ++i) {
            Rational f = m.at(i, col);
            if (f == 0) continue;
            for (size_t j = col; j < m.cols; ++j) m.at(i, j) -= f * m.at(k, j);
        }
    }
    return pivots;
}

size_t rank(Mat m) { return rref_in_place(m).size(); }

Rational det(Mat m) {
    if (m.rows != m.cols) throw std::invalid_argument("determinant of non-square matrix");
    Rational d = 1;
    for (size_t col = 0; col < m.cols; ++col) {
        size_t p = col;
        while (p < m.rows && m.at(p, col) == 0) ++p;
        if (p == m.rows) return 0;
        if (p != col) {
            for (size_t j = 0; j < m.cols; ++j) std::swap(m.at(p, j), m.at(col, j));
            d = -d;
        }
        d *= m.at(col, col);
        for (size_t i = col + 1; i < m.rows; ++i) {
            if (m.at(i, col) == 0) continue;
            Rational f = m.at(i, col) / m.at(col, col);
            for (size_t j = col; j < m.cols; ++j) m.at(i, j) -= f * m.at(col, j);
        }
    }
    return d;
}

std::optional<Mat> inverse(const Mat& m) {
    if (m.rows != m.cols) throw std::invalid_argument("inverse of non-square matrix");
    size_t n = m.rows;
    Mat aug(n, 2 * n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) aug.at(i, j) = m.at(i, j);
        aug.at(i, n + i) = 1;
    }
    auto piv = rref_in_place(aug);
    if (piv.size() != n || piv.back() != n - 1) return std::nullopt;
    Mat r(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) r.at(i, j) = aug.at(i, n + j);
    return r;
}

std::optional<std::vector<Rational>> solve(const Mat& m, const std::vector<Rational>& b) {
    if (b.size() != m.rows) throw std::invalid_argument("rhs size mismatch");
    Mat aug(m.rows, m.cols + 1);
    for (size_t i = 0; i < m.rows; ++i) {
        for (size_t j = 0; j < m.cols; ++j) aug.at(i, j) = m.at(i, j);
        aug.at(i, m.cols) = b[i];
    }
    auto piv = rref_in_place(aug);
    if (!piv.empty() && piv.back() == m.cols) return std::nullopt; // 0 = 1 row
    std::vector<Rational> x(m.cols, Rational(0));
    for (size_t k = 0; k < piv.size(); ++k) x[piv[k]] = aug.at(k, m.cols);
    return x;
}

Mat nullspace(const Mat& m) {
    Mat r = m;
    auto piv = rref_in_place(r);
    std::vector<bool> is_piv(m.cols, false);
    for (size_t c : piv) is_piv[c] = true;
    std::vector<size_t> free_cols;
    for (size_t c = 0; c < m.cols; ++c)
        if (!is_piv[c]) free_cols.push_back(c);
    Mat ns(m.cols, free_cols.size());
    for (size_t f = 0; f < free_cols.size(); ++f) {
        size_t fc = free_cols[f];
        ns.at(fc, f) = 1;
        for (size_t k = 0; k < piv.size(); ++k) ns.at(piv[k], f) = -r.at(k, fc);
    }
    return ns;
}

} // namespace greenbp
