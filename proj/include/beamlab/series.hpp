#pragma once

// Truncated power series in one variable, used for Taylor-mode jets along
// transversal geodesics. All operations truncate to the degree of the operands.

#include <cmath>
#include <complex>
#include <vector>

#include "beamlab/errors.hpp"

namespace beamlab {

template <class T>
class Series {
  public:
    Series() = default;
    explicit Series(int degree, T c0 = T(0)) : c_(degree + 1, T(0)) { c_[0] = c0; }
    static Series variable(int degree, T at) {
        Series s(degree, at);
        if (degree >= 1) s.c_[1] = T(1);
        return s;
    }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    T& operator[](int k) { return c_[k]; }
    const T& operator[](int k) const { return c_[k]; }
    const std::vector<T>& coeffs() const { return c_; }

    Series& operator+=(const Series& o) {
        for (int k = 0; k <= degree(); ++k) c_[k] += o.c_[k];
        return *this;
    }
    Series& operator-=(const Series& o) {
        for (int k = 0; k <= degree(); ++k) c_[k] -= o.c_[k];
        return *this;
    }
    Series& operator*=(T a) {
        for (auto& x : c_) x *= a;
        return *this;
    }

  private:
    std::vector<T> c_;
};

template <class T>
Series<T> operator+(Series<T> a, const Series<T>& b) { return a += b; }
template <class T>
Series<T> operator-(Series<T> a, const Series<T>& b) { return a -= b; }
template <class T>
Series<T> operator-(Series<T> a) { return a *= T(-1); }
template <class T>
Series<T> operator*(Series<T> a, T s) { return a *= s; }
template <class T>
Series<T> operator*(T s, Series<T> a) { return a *= s; }

template <class T>
Series<T> operator*(const Series<T>& a, const Series<T>& b) {
    const int n = a.degree();
    Series<T> r(n);
    for (int i = 0; i <= n; ++i) {
        if (a[i] == T(0)) continue;
        for (int j = 0; i + j <= n; ++j) r[i + j] += a[i] * b[j];
    }
    return r;
}

template <class T>
Series<T> operator/(const Series<T>& a, const Series<T>& b) {
    if (b[0] == T(0)) throw DomainError("division by zero");
    const int n = a.degree();
    Series<T> r(n);
    for (int k = 0; k <= n; ++k) {
        T acc = a[k];
        for (int j = 1; j <= k; ++j) acc -= b[j] * r[k - j];
        r[k] = acc / b[0];
    }
    return r;
}

template <class T>
Series<T> exp(const Series<T>& a) {
    using std::exp;
    const int n = a.degree();
    Series<T> r(n, exp(a[0]));
    for (int k = 1; k <= n; ++k) {
        T acc(0);
        for (int j = 1; j <= k; ++j) acc += T(j) * a[j] * r[k - j];
        r[k] = acc / T(k);
    }
    return r;
}

template <class T>
Series<T> log(const Series<T>& a) {
    using std::log;
    if constexpr (std::is_floating_point_v<T>) {
        if (!(a[0] > 0)) throw DomainError("log of non-positive value");
    }
    const int n = a.degree();
    Series<T> r(n, log(a[0]));
    for (int k = 1; k <= n; ++k) {
        T acc = a[k];
        for (int j = 1; j < k; ++j) acc -= T(j) * r[j] * a[k - j] / T(k);
        r[k] = acc / a[0];
    }
    return r;
}

template <class T>
void sincos(const Series<T>& a, Series<T>& s, Series<T>& c) {
    using std::cos;
    using std::sin;
    const int n = a.degree();
    s = Series<T>(n, sin(a[0]));
    c = Series<T>(n, cos(a[0]));
    for (int k = 1; k <= n; ++k) {
        T as(0), ac(0);
        for (int j = 1; j <= k; ++j) {
            as += T(j) * a[j] * c[k - j];
            ac -= T(j) * a[j] * s[k - j];
        }
        s[k] = as / T(k);
        c[k] = ac / T(k);
    }
}

template <class T>
Series<T> sin(const Series<T>& a) {
    Series<T> s, c;
    sincos(a, s, c);
    return s;
}

template <class T>
Series<T> cos(const Series<T>& a) {
    Series<T> s, c;
    sincos(a, s, c);
    return c;
}

template <class T>
Series<T> sqrt(const Series<T>& a) {
    using std::sqrt;
    if constexpr (std::is_floating_point_v<T>) {
        if (!(a[0] > 0)) throw DomainError("sqrt of non-positive series");
    }
    const int n = a.degree();
    Series<T> r(n, sqrt(a[0]));
    for (int k = 1; k <= n; ++k) {
        T acc = a[k];
        for (int j = 1; j < k; ++j) acc -= r[j] * r[k - j];
        r[k] = acc / (T(2) * r[0]);
    }
    return r;
}

// a^p for constant p, via a r' = p a' r.
template <class T>
Series<T> pow(const Series<T>& a, T p) {
    using std::pow;
    if (a[0] == T(0)) {
        // Integer powers of a series vanishing at the origin.
        if constexpr (std::is_floating_point_v<T>) {
            double ip;
            if (std::modf(p, &ip) == 0.0 && p >= 0) {
                Series<T> r(a.degree(), T(1));
                for (int i = 0; i < static_cast<int>(p); ++i) r = r * a;
                return r;
            }
        }
        throw DomainError("non-integer power of a series vanishing at the origin");
    }
    const int n = a.degree();
    Series<T> r(n, pow(a[0], p));
    for (int k = 1; k <= n; ++k) {
        T acc(0);
        for (int j = 1; j <= k; ++j) acc += (p * T(j) - T(k - j)) * a[j] * r[k - j];
        r[k] = acc / (T(k) * a[0]);
    }
    return r;
}

template <class T>
Series<T> pow(const Series<T>& a, const Series<T>& b) {
    bool const_exp = true;
    for (int k = 1; k <= b.degree(); ++k)
        if (b[k] != T(0)) const_exp = false;
    if (const_exp) return pow(a, b[0]);
    return exp(b * log(a));
}

}  // namespace beamlab
