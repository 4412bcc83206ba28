#pragma once

#include "greenbp/laurent.hpp"
#include "greenbp/poly.hpp"

#include <memory>
#include <string>

namespace greenbp {

// Parsed arithmetic expression over integers, rationals p/q, the symbol x,
// + - * / ^ and parentheses.  Decimal literals are rejected (exact inputs
// only).  Exponents are integers except for the Laurent form x^(p/q).
struct ExprNode {
    enum Kind { Num, Var, Add, Sub, Mul, Div, Neg, Pow } kind;
    Rational value;                      // Num
    std::shared_ptr<ExprNode> lhs, rhs;  // binary / Neg(lhs) / Pow(lhs, rhs)
};

using Expr = std::shared_ptr<ExprNode>;

Expr parse_expression(const std::string& text);

// Conversion to num/den form; fractional exponents are rejected here.
RationalFunction expr_to_rational_function(const Expr& e);

// Conversion to an exact Laurent polynomial; division only by monomials,
// x^(p/q) allowed.  Throws ParseError when the expression leaves the
// Laurent-polynomial fragment (use expr_to_forcing for the general case).
GenLaurentPoly expr_to_laurent_poly(const Expr& e);

// General forcing: exact when the expression stays a Laurent polynomial,
// otherwise a truncated expansion of the rational function through exponent
// `upto` with a certified radius.
GenLaurentElement expr_to_forcing(const Expr& e, long upto);
GenLaurentElement parse_forcing(const std::string& text, long upto);

} // namespace greenbp
