#include "greenbp/expr.hpp"

#include <cctype>

namespace greenbp {

namespace {

struct Lexer {
    std::string s;
    size_t i = 0;

    void skip() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool eof() {
        skip();
        return i >= s.size();
    }
    char peek() {
        skip();
        return i < s.size() ? s[i] : '\0';
    }
    char get() {
        skip();
        return i < s.size() ? s[i++] : '\0';
    }
    Rational number() {
        skip();
        size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i < s.size() && s[i] == '.')
            throw ParseError("decimal literal at '" + s.substr(start) +
                             "': decimals are not exact, write a fraction (1/2 instead of 0.5)");
        if (i == start) throw ParseError("expected a number at '" + s.substr(i) + "'");
        return Rational(Int(s.substr(start, i - start)));
    }
};

Expr mk(ExprNode n) { return std::make_shared<ExprNode>(std::move(n)); }
Expr mk_num(Rational v) { return mk({ExprNode::Num, std::move(v), nullptr, nullptr}); }

struct Parser {
    Lexer lx;

    Expr parse() {
        Expr e = sum();
        if (!lx.eof()) throw ParseError("trailing input at '" + lx.s.substr(lx.i) + "'");
        return e;
    }

    Expr sum() {
        Expr e = product();
        while (true) {
            char c = lx.peek();
            if (c == '+') { lx.get(); e = mk({ExprNode::Add, 0, e, product()}); }
            else if (c == '-') { lx.get(); e = mk({ExprNode::Sub, 0, e, product()}); }
            else return e;
        }
    }

    Expr product() {
        Expr e = unary();
        while (true) {
            char c = lx.peek();
            if (c == '*') { lx.get(); e = mk({ExprNode::Mul, 0, e, unary()}); }
            else if (c == '/') { lx.get(); e = mk({ExprNode::Div, 0, e, unary()}); }
            else return e;
        }
    }

    Expr unary() {
        char c = lx.peek();
        if (c == '-') { lx.get(); return mk({ExprNode::Neg, 0, unary(), nullptr}); }
        if (c == '+') { lx.get(); return unary(); }
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (lx.peek() == '^') {
            lx.get();
            Expr e = exponent();
            return mk({ExprNode::Pow, 0, base, e});
        }
        return base;
    }

    // integer, possibly signed; or parenthesized (possibly signed) rational
    Expr exponent() {
        char c = lx.peek();
        if (c == '(') {
            lx.get();
            bool neg = false;
            while (lx.peek() == '-' || lx.peek() == '+') neg ^= (lx.get() == '-');
            Rational num = lx.number();
            if (lx.peek() == '/') {
                lx.get();
                Rational den = lx.number();
                if (den == 0) throw ParseError("zero denominator in exponent");
                num /= den;
            }
            if (lx.get() != ')') throw ParseError("expected ')' closing exponent");
            return mk_num(neg ? -num : num);
        }
        bool neg = false;
        while (lx.peek() == '-' || lx.peek() == '+') neg ^= (lx.get() == '-');
        Rational v = lx.number();
        return mk_num(neg ? -v : v);
    }

    Expr atom() {
        char c = lx.peek();
        if (c == '(') {
            lx.get();
            Expr e = sum();
            if (lx.get() != ')') throw ParseError("expected ')'");
            return e;
        }
        if (c == 'x') {
            lx.get();
            if (lx.i < lx.s.size() && std::isalnum(static_cast<unsigned char>(lx.s[lx.i])))
                throw ParseError("unknown symbol at '" + lx.s.substr(lx.i - 1) + "'");
            return mk({ExprNode::Var, 0, nullptr, nullptr});
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            Rational v = lx.number();
            return mk_num(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c)))
            throw ParseError("unknown symbol '" + std::string(1, c) + "' (only x is allowed)");
        throw ParseError(std::string("unexpected character '") + c + "'");
    }
};

Rational expr_to_constant(const Expr& e) {
    switch (e->kind) {
        case ExprNode::Num: return e->value;
        case ExprNode::Var: throw ParseError("x is not allowed in this position");
        case ExprNode::Add: return expr_to_constant(e->lhs) + expr_to_constant(e->rhs);
        case ExprNode::Sub: return expr_to_constant(e->lhs) - expr_to_constant(e->rhs);
        case ExprNode::Mul: return expr_to_constant(e->lhs) * expr_to_constant(e->rhs);
        case ExprNode::Div: {
            Rational d = expr_to_constant(e->rhs);
            if (d == 0) throw ParseError("division by zero");
            return expr_to_constant(e->lhs) / d;
        }
        case ExprNode::Neg: return -expr_to_constant(e->lhs);
        case ExprNode::Pow: {
            Rational ex = expr_to_constant(e->rhs);
            if (!rat_is_integer(ex)) throw ParseError("fractional exponent on a constant");
            return rat_pow(expr_to_constant(e->lhs), rat_to_long(ex));
        }
    }
    throw ParseError("corrupt expression");
}

} // namespace

Expr parse_expression(const std::string& text) {
    Parser p{Lexer{text}};
    return p.parse();
}

RationalFunction expr_to_rational_function(const Expr& e) {
    switch (e->kind) {
        case ExprNode::Num: return {Poly(e->value), Poly(Rational(1))};
        case ExprNode::Var: return {Poly::x(), Poly(Rational(1))};
        case ExprNode::Add: return expr_to_rational_function(e->lhs) + expr_to_rational_function(e->rhs);
        case ExprNode::Sub: return expr_to_rational_function(e->lhs) - expr_to_rational_function(e->rhs);
        case ExprNode::Mul: return expr_to_rational_function(e->lhs) * expr_to_rational_function(e->rhs);
        case ExprNode::Div: {
            RationalFunction d = expr_to_rational_function(e->rhs);
            if (d.is_zero()) throw ParseError("division by zero");
            return expr_to_rational_function(e->lhs) / d;
        }
        case ExprNode::Neg: return -expr_to_rational_function(e->lhs);
        case ExprNode::Pow: {
            Rational ex = expr_to_constant(e->rhs);
            if (!rat_is_integer(ex))
                throw ParseError("rational exponents are only allowed as x^(p/q) in "
                                 "Laurent-polynomial positions");
            long n = rat_to_long(ex);
            RationalFunction b = expr_to_rational_function(e->lhs);
            RationalFunction r{Poly(Rational(1)), Poly(Rational(1))};
            bool inv = n < 0;
            for (long i = 0; i < (inv ? -n : n); ++i) r = r * b;
            if (inv) {
                if (r.is_zero()) throw ParseError("division by zero");
                r = RationalFunction{Poly(Rational(1)), Poly(Rational(1))} / r;
            }
            return r;
        }
    }
    throw ParseError("corrupt expression");
}

GenLaurentPoly expr_to_laurent_poly(const Expr& e) {
    switch (e->kind) {
        case ExprNode::Num: return GenLaurentPoly::constant(e->value);
        case ExprNode::Var: return GenLaurentPoly::monomial(1, 1);
        case ExprNode::Add: return expr_to_laurent_poly(e->lhs) + expr_to_laurent_poly(e->rhs);
        case ExprNode::Sub: return expr_to_laurent_poly(e->lhs) - expr_to_laurent_poly(e->rhs);
        case ExprNode::Mul: return expr_to_laurent_poly(e->lhs) * expr_to_laurent_poly(e->rhs);
        case ExprNode::Div: {
            GenLaurentPoly d = expr_to_laurent_poly(e->rhs);
            if (d.is_zero()) throw ParseError("division by zero");
            if (d.t.size() != 1)
                throw ParseError("division by '" + d.to_string() +
                                 "' leaves the Laurent-polynomial fragment");
            auto [de, dc] = *d.t.begin();
            return expr_to_laurent_poly(e->lhs) * GenLaurentPoly::monomial(Rational(1) / dc, -de);
        }
        case ExprNode::Neg: return -expr_to_laurent_poly(e->lhs);
        case ExprNode::Pow: {
            Rational ex = expr_to_constant(e->rhs);
            if (e->lhs->kind == ExprNode::Var) return GenLaurentPoly::monomial(1, ex);
            if (!rat_is_integer(ex))
                throw ParseError("rational exponents are only allowed directly on x");
            long n = rat_to_long(ex);
            GenLaurentPoly b = expr_to_laurent_poly(e->lhs);
            if (n < 0) {
                if (b.is_zero()) throw ParseError("division by zero");
                if (b.t.size() != 1)
                    throw ParseError("negative power of '" + b.to_string() +
                                     "' leaves the Laurent-polynomial fragment");
                auto [be, bc] = *b.t.begin();
                return GenLaurentPoly::monomial(rat_pow(bc, n), be * Rational(n));
            }
            GenLaurentPoly r = GenLaurentPoly::constant(1);
            for (long i = 0; i < n; ++i) r *= b;
            return r;
        }
    }
    throw ParseError("corrupt expression");
}

GenLaurentElement expr_to_forcing(const Expr& e, long upto) {
    try {
        return GenLaurentElement::from_laurent_poly(expr_to_laurent_poly(e));
    } catch (const ParseError&) {
        // fall through to the rational-function route
    }
    return laurent_expand(expr_to_rational_function(e), upto);
}

GenLaurentElement parse_forcing(const std::string& text, long upto) {
    return expr_to_forcing(parse_expression(text), upto);
}

} // namespace greenbp
