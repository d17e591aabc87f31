#include "beamlab/expression.hpp"

#include <charconv>
#include <cmath>
#include <cctype>
#include <functional>

namespace beamlab {

namespace {

using NodePtr = Expression::NodePtr;
using Node = Expression::Node;

const char* kVarNames[kNumVars] = {"x1", "x2", "x3", "t"};

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}
NodePtr make_const(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}
NodePtr make_var(int i) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->var = i;
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double apply(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return detail::checked_div(a, b);
        case Op::Pow: return detail::checked_pow(a, b);
        case Op::Neg: return -a;
        case Op::Exp: return std::exp(a);
        case Op::Log: return detail::checked_log(a);
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Sqrt: return detail::checked_sqrt(a);
        case Op::Abs: return std::fabs(a);
        case Op::Max: return std::max(a, b);
        case Op::Min: return std::min(a, b);
        default: return 0.0;
    }
}

bool is_binary(Op op) {
    return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Pow || op == Op::Max ||
           op == Op::Min;
}

// Light algebraic simplification used when building derivative trees.
NodePtr simp(Op op, NodePtr a, NodePtr b = nullptr) {
    if (a->op == Op::Const && (!b || b->op == Op::Const)) {
        // Fold only when the result is finite; otherwise keep the tree so the
        // domain error surfaces at evaluation time.
        try {
            double v = apply(op, a->value, b ? b->value : 0.0);
            if (std::isfinite(v)) return make_const(v);
        } catch (const DomainError&) {
        }
    }
    switch (op) {
        case Op::Add:
            if (is_const(a, 0)) return b;
            if (is_const(b, 0)) return a;
            if (b->op == Op::Neg) return simp(Op::Sub, a, b->a);
            break;
        case Op::Sub:
            if (is_const(b, 0)) return a;
            if (is_const(a, 0)) return simp(Op::Neg, b);
            if (b->op == Op::Neg) return simp(Op::Add, a, b->a);
            break;
        case Op::Mul:
            if (is_const(a, 0) || is_const(b, 0)) return make_const(0);
            if (is_const(a, 1)) return b;
            if (is_const(b, 1)) return a;
            if (is_const(a, -1)) return simp(Op::Neg, b);
            if (is_const(b, -1)) return simp(Op::Neg, a);
            if (a->op == Op::Neg) return simp(Op::Neg, simp(Op::Mul, a->a, b));
            if (b->op == Op::Neg) return simp(Op::Neg, simp(Op::Mul, a, b->a));
            break;
        case Op::Div:
            if (is_const(a, 0) && !is_const(b, 0)) return make_const(0);
            if (is_const(b, 1)) return a;
            if (a->op == Op::Neg) return simp(Op::Neg, simp(Op::Div, a->a, b));
            break;
        case Op::Pow:
            if (is_const(b, 1)) return a;
            if (is_const(b, 0)) return make_const(1);
            break;
        case Op::Neg:
            if (a->op == Op::Neg) return a->a;
            break;
        default: break;
    }
    return make(op, std::move(a), std::move(b));
}

// ---------------------------------------------------------------- parser

class Parser {
  public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr parse() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
        return n;
    }

  private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    NodePtr expr() {
        NodePtr n = term();
        for (;;) {
            if (accept('+'))
                n = make(Op::Add, n, term());
            else if (accept('-'))
                n = make(Op::Sub, n, term());
            else
                return n;
        }
    }
    NodePtr term() {
        NodePtr n = unary();
        for (;;) {
            if (accept('*'))
                n = make(Op::Mul, n, unary());
            else if (accept('/'))
                n = make(Op::Div, n, unary());
            else
                return n;
        }
    }
    NodePtr unary() {
        if (accept('-')) {
            NodePtr a = unary();
            if (a->op == Op::Const) return make_const(-a->value);
            return make(Op::Neg, a);
        }
        if (accept('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Op::Pow, base, unary());
        return base;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of expression", pos_);
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        if (accept('(')) {
            NodePtr n = expr();
            expect(')');
            return n;
        }
        throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
    }
    NodePtr number() {
        const char* begin = s_.data() + pos_;
        const char* end = s_.data() + s_.size();
        double v = 0;
        auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc()) throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(res.ptr - begin);
        return make_const(v);
    }
    NodePtr name() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        std::string id(s_.substr(start, pos_ - start));
        for (int i = 0; i < kNumVars; ++i)
            if (id == kVarNames[i]) return make_var(i);
        if (id == "pi") return make_const(M_PI);
        struct Fn {
            const char* name;
            Op op;
            int arity;
        };
        static const Fn fns[] = {{"exp", Op::Exp, 1},  {"log", Op::Log, 1},   {"sin", Op::Sin, 1},
                                 {"cos", Op::Cos, 1},  {"sqrt", Op::Sqrt, 1}, {"abs", Op::Abs, 1},
                                 {"pow", Op::Pow, 2},  {"max", Op::Max, 2},   {"min", Op::Min, 2}};
        for (const Fn& f : fns) {
            if (id != f.name) continue;
            expect('(');
            NodePtr a = expr();
            NodePtr b;
            if (f.arity == 2) {
                expect(',');
                b = expr();
            }
            expect(')');
            return make(f.op, a, b);
        }
        throw ParseError("unknown identifier '" + id + "'", start);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

// --------------------------------------------------------------- printer

int precedence(const NodePtr& n) {
    switch (n->op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        case Op::Const: return n->value < 0 ? 3 : 5;
        default: return 5;
    }
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void print(const NodePtr& n, std::string& out);

void print_operand(const NodePtr& n, int min_prec, std::string& out) {
    if (precedence(n) < min_prec) {
        out += '(';
        print(n, out);
        out += ')';
    } else {
        print(n, out);
    }
}

void print(const NodePtr& n, std::string& out) {
    switch (n->op) {
        case Op::Const: out += format_number(n->value); return;
        case Op::Var: out += kVarNames[n->var]; return;
        case Op::Add:
        case Op::Sub:
            print_operand(n->a, 1, out);
            out += n->op == Op::Add ? " + " : " - ";
            print_operand(n->b, 2, out);
            return;
        case Op::Mul:
        case Op::Div:
            print_operand(n->a, 2, out);
            out += n->op == Op::Mul ? "*" : "/";
            print_operand(n->b, 3, out);
            return;
        case Op::Neg:
            out += '-';
            print_operand(n->a, 3, out);
            return;
        case Op::Pow:
            print_operand(n->a, 5, out);
            out += '^';
            print_operand(n->b, 3, out);
            return;
        default: break;
    }
    static const char* names[] = {"", "", "", "", "", "", "", "pow", "exp", "log", "sin", "cos", "sqrt", "abs", "max", "min"};
    out += names[static_cast<int>(n->op)];
    out += '(';
    print(n->a, out);
    if (n->b) {
        out += ", ";
        print(n->b, out);
    }
    out += ')';
}

// ------------------------------------------------------------ derivative

NodePtr diff(const NodePtr& n, int v) {
    const NodePtr& a = n->a;
    const NodePtr& b = n->b;
    switch (n->op) {
        case Op::Const: return make_const(0);
        case Op::Var: return make_const(n->var == v ? 1 : 0);
        case Op::Add: return simp(Op::Add, diff(a, v), diff(b, v));
        case Op::Sub: return simp(Op::Sub, diff(a, v), diff(b, v));
        case Op::Neg: return simp(Op::Neg, diff(a, v));
        case Op::Mul: return simp(Op::Add, simp(Op::Mul, diff(a, v), b), simp(Op::Mul, a, diff(b, v)));
        case Op::Div: {
            // (a/b)' = a'/b - a b'/b^2
            NodePtr t1 = simp(Op::Div, diff(a, v), b);
            NodePtr t2 = simp(Op::Div, simp(Op::Mul, a, diff(b, v)), simp(Op::Mul, b, b));
            return simp(Op::Sub, t1, t2);
        }
        case Op::Pow: {
            NodePtr db = diff(b, v);
            NodePtr da = diff(a, v);
            if (b->op == Op::Const) {
                NodePtr p = simp(Op::Pow, a, make_const(b->value - 1));
                return simp(Op::Mul, simp(Op::Mul, make_const(b->value), p), da);
            }
            // d(a^b) = a^b (b' log a + b a'/a)
            NodePtr t1 = simp(Op::Mul, db, simp(Op::Log, a));
            NodePtr t2 = simp(Op::Div, simp(Op::Mul, b, da), a);
            return simp(Op::Mul, n, simp(Op::Add, t1, t2));
        }
        case Op::Exp: return simp(Op::Mul, n, diff(a, v));
        case Op::Log: return simp(Op::Div, diff(a, v), a);
        case Op::Sin: return simp(Op::Mul, simp(Op::Cos, a), diff(a, v));
        case Op::Cos: return simp(Op::Neg, simp(Op::Mul, simp(Op::Sin, a), diff(a, v)));
        case Op::Sqrt: return simp(Op::Div, diff(a, v), simp(Op::Mul, make_const(2), n));
        case Op::Abs: {
            // sign(a) a', with sign(a) = a/|a|
            return simp(Op::Mul, simp(Op::Div, a, n), diff(a, v));
        }
        case Op::Max:
        case Op::Min: {
            // Piecewise: derivative of the selected branch. Encoded with the
            // identity max(a,b) = (a+b+|a-b|)/2.
            NodePtr d = simp(Op::Sub, a, b);
            NodePtr sgn = simp(Op::Div, d, simp(Op::Abs, d));
            NodePtr dd = simp(Op::Mul, sgn, simp(Op::Sub, diff(a, v), diff(b, v)));
            NodePtr sum = simp(Op::Add, diff(a, v), diff(b, v));
            NodePtr r = n->op == Op::Max ? simp(Op::Add, sum, dd) : simp(Op::Sub, sum, dd);
            return simp(Op::Mul, make_const(0.5), r);
        }
    }
    return make_const(0);
}

NodePtr subst(const NodePtr& n, int v, const NodePtr& e) {
    if (n->op == Op::Var) return n->var == v ? e : n;
    if (n->op == Op::Const) return n;
    NodePtr a = subst(n->a, v, e);
    NodePtr b = n->b ? subst(n->b, v, e) : nullptr;
    return make(n->op, a, b);
}

bool depends(const NodePtr& n, int v) {
    if (n->op == Op::Var) return n->var == v;
    if (n->op == Op::Const) return false;
    return depends(n->a, v) || (n->b && depends(n->b, v));
}

}  // namespace

Expression::Expression() : Expression(make_const(0)) {}
Expression::Expression(double c) : Expression(make_const(c)) {}
Expression::Expression(NodePtr n) : root_(std::move(n)) { compile(); }

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).parse()); }
Expression Expression::variable(int index) { return Expression(make_var(index)); }

std::string Expression::str() const {
    std::string out;
    print(root_, out);
    return out;
}

bool Expression::depends_on(int var) const { return depends(root_, var); }

Expression Expression::derivative(int var) const { return Expression(diff(root_, var)); }

Expression Expression::substitute(int var, const Expression& e) const {
    return Expression(subst(root_, var, e.root_));
}

void Expression::compile() {
    tape_.clear();
    int depth = 0;
    max_stack_ = 1;
    std::function<void(const NodePtr&)> emit = [&](const NodePtr& n) {
        if (n->a) emit(n->a);
        if (n->b) emit(n->b);
        tape_.push_back({n->op, n->value, n->var});
        if (n->op == Op::Const || n->op == Op::Var)
            ++depth;
        else if (is_binary(n->op))
            --depth;
        max_stack_ = std::max(max_stack_, depth);
    };
    emit(root_);
}

Expression operator+(const Expression& a, const Expression& b) { return Expression(simp(Op::Add, a.root_, b.root_)); }
Expression operator-(const Expression& a, const Expression& b) { return Expression(simp(Op::Sub, a.root_, b.root_)); }
Expression operator*(const Expression& a, const Expression& b) { return Expression(simp(Op::Mul, a.root_, b.root_)); }
Expression operator/(const Expression& a, const Expression& b) { return Expression(simp(Op::Div, a.root_, b.root_)); }
Expression operator-(const Expression& a) { return Expression(simp(Op::Neg, a.root_)); }
Expression pow(const Expression& a, const Expression& b) { return Expression(simp(Op::Pow, a.root_, b.root_)); }
Expression exp(const Expression& a) { return Expression(simp(Op::Exp, a.root_)); }
Expression log(const Expression& a) { return Expression(simp(Op::Log, a.root_)); }

}  // namespace beamlab
