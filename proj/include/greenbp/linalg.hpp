#pragma once

#include "greenbp/rational.hpp"

#include <optional>
#include <vector>

namespace greenbp {

// Dense exact matrix over Q.  Row-major.
struct Mat {
    size_t rows = 0, cols = 0;
    std::vector<Rational> a;

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), a(r * c, Rational(0)) {}
    static Mat identity(size_t n);

    Rational& at(size_t i, size_t j) { return a[i * cols + j]; }
    const Rational& at(size_t i, size_t j) const { return a[i * cols + j]; }

    friend Mat operator*(const Mat& x, const Mat& y);
    bool operator==(const Mat& o) const = default;
};

// Reduced row echelon form with leftmost-pivot selection (first nonzero entry
// scanning columns left to right, rows top to bottom; no pivot scaling during
// elimination, normalization at the end).  Returns the pivot columns.
std::vector<size_t> rref_in_place(Mat& m);

size_t rank(Mat m);
Rational det(Mat m);

// inverse; empty when singular
std::optional<Mat> inverse(const Mat& m);

// one solution of M x = b; empty when inconsistent.  For underdetermined
// systems free variables are set to 0.
std::optional<std::vector<Rational>> solve(const Mat& m, const std::vector<Rational>& b);

// basis of the nullspace (columns of the returned matrix)
Mat nullspace(const Mat& m);

} // namespace greenbp
