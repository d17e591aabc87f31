#pragma once

// Quintic Hermite interpolation on one interval of width h, from values,
// first and second derivatives at both ends. s in [0, 1] is the local
// coordinate. Returns value and the first two t-derivatives.

namespace beamlab {

template <class V>
struct Hermite3 {
    V value, d1, d2;
};

template <class V>
Hermite3<V> hermite5(const V& p0, const V& m0, const V& a0, const V& p1, const V& m1, const V& a1, double h,
                     double s) {
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    const double h3 = 0.5 * s3 - s4 + 0.5 * s5;
    const double h4 = -4 * s3 + 7 * s4 - 3 * s5;
    const double h5 = 10 * s3 - 15 * s4 + 6 * s5;

    const double d0 = -30 * s2 + 60 * s3 - 30 * s4;
    const double d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
    const double d2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
    const double d3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
    const double d4 = -12 * s2 + 28 * s3 - 15 * s4;
    const double d5 = 30 * s2 - 60 * s3 + 30 * s4;

    const double e0 = -60 * s + 180 * s2 - 120 * s3;
    const double e1 = -36 * s + 96 * s2 - 60 * s3;
    const double e2 = 1 - 9 * s + 18 * s2 - 10 * s3;
    const double e3 = 3 * s - 12 * s2 + 10 * s3;
    const double e4 = -24 * s + 84 * s2 - 60 * s3;
    const double e5 = 60 * s - 180 * s2 + 120 * s3;

    // Scaled end data: derivatives in the local coordinate.
    const V M0 = m0 * h, M1 = m1 * h;
    const V A0 = a0 * (h * h), A1 = a1 * (h * h);
    Hermite3<V> r{p0 * h0 + M0 * h1 + A0 * h2 + A1 * h3 + M1 * h4 + p1 * h5,
                  (p0 * d0 + M0 * d1 + A0 * d2 + A1 * d3 + M1 * d4 + p1 * d5) * (1.0 / h),
                  (p0 * e0 + M0 * e1 + A0 * e2 + A1 * e3 + M1 * e4 + p1 * e5) * (1.0 / (h * h))};
    return r;
}

// Cubic Hermite from values and first derivatives.
template <class V>
V hermite3(const V& p0, const V& m0, const V& p1, const V& m1, double h, double s) {
    const double s2 = s * s, s3 = s2 * s;
    return p0 * (2 * s3 - 3 * s2 + 1) + m0 * (h * (s3 - 2 * s2 + s)) + p1 * (-2 * s3 + 3 * s2) + m1 * (h * (s3 - s2));
}

}  // namespace beamlab
