#pragma once

// Scalar field expressions over the variables x1, x2, x3, t.
//
// Grammar: numbers, pi, variables, + - * / ^ (right-associative), unary minus,
// and the functions exp log sin cos sqrt pow(a,b) plus abs max(a,b) min(a,b).
// Evaluation is templated so the same tree runs on double, complex and
// truncated power series.

#include <array>
#include <complex>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "beamlab/errors.hpp"
#include "beamlab/series.hpp"

namespace beamlab {

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos, Sqrt, Abs, Max, Min };

inline constexpr int kNumVars = 4;  // x1, x2, x3, t
inline constexpr int kVarT = 3;

class Expression {
  public:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;
    struct Node {
        Op op;
        double value = 0.0;
        int var = 0;
        NodePtr a, b;
    };

    Expression();  // the constant 0
    explicit Expression(double c);
    static Expression parse(std::string_view text);
    static Expression variable(int index);

    std::string str() const;
    bool is_constant() const { return root_->op == Op::Const; }
    bool depends_on(int var) const;

    Expression derivative(int var) const;

    double operator()(double x1, double x2 = 0.0, double x3 = 0.0, double t = 0.0) const {
        std::array<double, kNumVars> v{x1, x2, x3, t};
        return eval<double>(v.data());
    }

    template <class T>
    T eval(const T* vars) const;

    friend Expression operator+(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a, const Expression& b);
    friend Expression operator*(const Expression& a, const Expression& b);
    friend Expression operator/(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a);
    friend Expression pow(const Expression& a, const Expression& b);
    friend Expression exp(const Expression& a);
    friend Expression log(const Expression& a);

    // Replace variable `var` by expression `e` everywhere.
    Expression substitute(int var, const Expression& e) const;

    const NodePtr& root() const { return root_; }

  private:
    explicit Expression(NodePtr n);
    void compile();

    struct Instr {
        Op op;
        double value;
        int var;
    };
    NodePtr root_;
    std::vector<Instr> tape_;
    int max_stack_ = 1;
};

namespace detail {

inline double checked_div(double a, double b) {
    if (b == 0.0) throw DomainError("division by zero");
    return a / b;
}
inline double checked_log(double a) {
    if (!(a > 0.0)) throw DomainError("log of non-positive value");
    return std::log(a);
}
inline double checked_sqrt(double a) {
    if (a < 0.0) throw DomainError("sqrt of negative value");
    return std::sqrt(a);
}
inline double checked_pow(double a, double b) {
    double r = std::pow(a, b);
    if (std::isnan(r) && !std::isnan(a) && !std::isnan(b)) throw DomainError("pow outside its domain");
    if (a == 0.0 && b < 0.0) throw DomainError("division by zero in pow");
    return r;
}
inline double real_part(double x) { return x; }
inline double real_part(std::complex<double> x) { return x.real(); }
inline double real_part(const Series<double>& x) { return x[0]; }

inline std::complex<double> checked_div(std::complex<double> a, std::complex<double> b) {
    if (b == 0.0) throw DomainError("division by zero");
    return a / b;
}
inline std::complex<double> checked_log(std::complex<double> a) {
    if (a == 0.0) throw DomainError("log of zero");
    return std::log(a);
}
inline std::complex<double> checked_sqrt(std::complex<double> a) { return std::sqrt(a); }
inline std::complex<double> checked_pow(std::complex<double> a, std::complex<double> b) { return std::pow(a, b); }

inline Series<double> checked_div(const Series<double>& a, const Series<double>& b) { return a / b; }
inline Series<double> checked_log(const Series<double>& a) { return log(a); }
inline Series<double> checked_sqrt(const Series<double>& a) { return sqrt(a); }
inline Series<double> checked_pow(const Series<double>& a, const Series<double>& b) { return pow(a, b); }

template <class T>
T make_const(double v, const T* like) {
    if constexpr (std::is_same_v<T, Series<double>>)
        return Series<double>(like[0].degree(), v);
    else
        return T(v);
}

inline double abs_of(double a) { return std::fabs(a); }
inline std::complex<double> abs_of(const std::complex<double>& a) { return a.real() < 0 ? -a : a; }
inline Series<double> abs_of(const Series<double>& a) { return a[0] < 0 ? -a : a; }

}  // namespace detail

template <class T>
T Expression::eval(const T* vars) const {
    using std::cos;
    using std::exp;
    using std::sin;
    constexpr int kMaxStack = 48;
    if (max_stack_ > kMaxStack) throw DomainError("expression nesting too deep");
    T st[kMaxStack];
    int sp = -1;
    for (const Instr& in : tape_) {
        switch (in.op) {
            case Op::Const: st[++sp] = detail::make_const<T>(in.value, vars); break;
            case Op::Var: st[++sp] = vars[in.var]; break;
            case Op::Neg: st[sp] = -st[sp]; break;
            case Op::Exp: st[sp] = exp(st[sp]); break;
            case Op::Log: st[sp] = detail::checked_log(st[sp]); break;
            case Op::Sin: st[sp] = sin(st[sp]); break;
            case Op::Cos: st[sp] = cos(st[sp]); break;
            case Op::Sqrt: st[sp] = detail::checked_sqrt(st[sp]); break;
            case Op::Abs: st[sp] = detail::abs_of(st[sp]); break;
            default: {
                const T& b = st[sp];
                T& a = st[sp - 1];
                switch (in.op) {
                    case Op::Add: a = a + b; break;
                    case Op::Sub: a = a - b; break;
                    case Op::Mul: a = a * b; break;
                    case Op::Div: a = detail::checked_div(a, b); break;
                    case Op::Pow: a = detail::checked_pow(a, b); break;
                    case Op::Max:
                        if (detail::real_part(b) > detail::real_part(a)) a = b;
                        break;
                    case Op::Min:
                        if (detail::real_part(b) < detail::real_part(a)) a = b;
                        break;
                    default: break;
                }
                --sp;
            }
        }
    }
    return st[0];
}

}  // namespace beamlab
