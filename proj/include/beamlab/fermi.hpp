#pragma once

// Fermi coordinates (t, y) around a geodesic on a surface: x = exp_{gamma(t)}(y E(t)).
// In these coordinates g = G(t,y)^2 dt^2 + dy^2 with G(t,0) = 1, G_y(t,0) = 0
// and G_yy = -K G.

#include <memory>
#include <optional>
#include <vector>

#include "beamlab/manifold.hpp"

namespace beamlab {

struct FermiMetric {
    double G = 1, G_t = 0, G_y = 0;
};

// y-Taylor coefficients (index = power of y) of the coefficient functions of
// Delta = g11 d_t^2 + gt d_t + d_y^2 + gy d_y, where g11 = G^{-2},
// gt = -G^{-3} G_t, gy = G_y / G.
struct AxisJets {
    std::vector<double> g11, gt, gy;
};

struct NormalizationReport {
    double max_metric_dev = 0;      // max |g^{jk}(t,0) - delta^{jk}|
    double max_metric_deriv = 0;    // max |d_i g^{jk}(t,0)|
    int samples = 0;
};

enum class TubeKind { Flat, Sphere, Numeric };

class FermiTube {
  public:
    virtual ~FermiTube() = default;

    TubeKind kind() const { return kind_; }
    double t_lo() const { return t_lo_; }
    double t_hi() const { return t_hi_; }
    // Cutoff radius delta'; the beam support is |y| < delta'/2.
    double delta() const { return delta_; }
    double support_radius() const { return 0.5 * delta_; }
    int jet_order() const { return n_max_; }
    const GeodesicPath& path() const { return *path_; }
    const MetricChart& chart() const { return *chart_; }

    virtual Vec2 to_chart(double t, double y) const = 0;
    // (t, y) with t in [t_lo, t_hi] and |y| < support radius, if any.
    virtual std::optional<Vec2> from_chart(const Vec2& x) const = 0;
    virtual FermiMetric metric(double t, double y) const = 0;
    virtual AxisJets jets(double t, int degree) const = 0;

    // F(t) with g^{11}_2 = -F y^2.
    double curvature_jet(double t) const;

    // Pull back the chart metric by finite differences of to_chart and
    // measure the deviation from the Fermi normal form on the axis.
    NormalizationReport check_normalization(int samples = 64, double step = 1e-5) const;
    // Sample collision test on the slab [t_lo, t_hi] x [-delta'/2, delta'/2].
    void check_injectivity(int nt = 240, int ny = 41) const;

  protected:
    FermiTube(TubeKind kind, const MetricChart& chart, const GeodesicPath& path, double delta, int n_max,
              double t_lo, double t_hi);

    TubeKind kind_;
    const MetricChart* chart_;
    const GeodesicPath* path_;
    double delta_;
    int n_max_;
    double t_lo_, t_hi_;
};

// Builds the tube over [t_lo, t_hi] (default: the whole stored path). Flat and
// sphere charts use closed-form maps; conformal charts use Taylor-mode series
// of transversal geodesics. Throws TubeRadiusError when the slab is not
// injectively embedded. The chart, path and frame must outlive the tube.
std::shared_ptr<FermiTube> build_fermi_tube(const MetricChart& chart, const GeodesicPath& path, const Frame& frame,
                                            double delta, int n_max, double t_lo, double t_hi,
                                            bool force_numeric = false);
std::shared_ptr<FermiTube> build_fermi_tube(const MetricChart& chart, const GeodesicPath& path, const Frame& frame,
                                            double delta, int n_max);

// Retry with halved delta' on TubeRadiusError, at most `halvings` times.
std::shared_ptr<FermiTube> build_fermi_tube_adaptive(const MetricChart& chart, const GeodesicPath& path,
                                                     const Frame& frame, double delta, int n_max, double t_lo,
                                                     double t_hi, int halvings = 6);

// Default tube radius: the largest delta' whose slab stays inside the region
// where the Fermi map is a diffeomorphism for the chart (see the notes in
// the implementation).
double default_tube_delta(const MetricChart& chart, const GeodesicPath& path);

// Cover [t_begin, t_end] of the path by intervals that each contain at most
// one self-intersection time, overlapping by `overlap`.
struct TubeInterval {
    double lo, hi;
};
std::vector<TubeInterval> segment_intervals(const GeodesicPath& path, double t_lo, double t_hi, double overlap);

}  // namespace beamlab
