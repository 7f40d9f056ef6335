#ifndef PIDEBS_NUMERICS_HPP
#define PIDEBS_NUMERICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pidebs/errors.hpp"

namespace pidebs {

// ---------------------------------------------------------------------------
// One-dimensional grid functions
// ---------------------------------------------------------------------------

/// Samples of a scalar function on strictly increasing abscissae.
///
/// Evaluation uses the shape-preserving piecewise cubic Hermite interpolant
/// (Fritsch-Carlson slopes), so monotone data yields a monotone interpolant.
class GridFn1D {
 public:
  GridFn1D() = default;

  GridFn1D(std::vector<double> nodes, std::vector<double> values)
      : nodes_(std::move(nodes)), values_(std::move(values)) {
    if (nodes_.size() < 2 || nodes_.size() != values_.size())
      throw OutOfRange("GridFn1D needs at least two nodes and matching values");
    for (std::size_t k = 1; k < nodes_.size(); ++k)
      if (!(nodes_[k] > nodes_[k - 1]))
        throw OutOfRange("GridFn1D nodes must be strictly increasing");
    const double span = nodes_.back() - nodes_.front();
    const double h = span / static_cast<double>(nodes_.size() - 1);
    uniform_ = true;
    for (std::size_t k = 0; k < nodes_.size() && uniform_; ++k)
      uniform_ = std::abs(nodes_[k] - (nodes_.front() + static_cast<double>(k) * h)) <= 1e-12 * std::max(1.0, span);
    compute_slopes();
  }

  /// Uniform grid on [a, b] with `count` nodes sampling `f`.
  template <typename F>
  static GridFn1D sample(F&& f, double a, double b, int count) {
    std::vector<double> x(static_cast<std::size_t>(count)), y(x.size());
    for (int k = 0; k < count; ++k) {
      x[k] = (k == count - 1) ? b : a + (b - a) * k / (count - 1);
      y[k] = f(x[k]);
    }
    return GridFn1D(std::move(x), std::move(y));
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return nodes_.size(); }
  double front() const { return nodes_.front(); }
  double back() const { return nodes_.back(); }
  bool uniform() const { return uniform_; }

  /// Index k of the segment [x_k, x_{k+1}] holding x (x already clamped).
  std::size_t segment(double x) const {
    const std::size_t last = nodes_.size() - 2;
    if (uniform_) {
      const double h = (nodes_.back() - nodes_.front()) / static_cast<double>(nodes_.size() - 1);
      const double t = (x - nodes_.front()) / h;
      if (t <= 0.0) return 0;
      auto k = static_cast<std::size_t>(t);
      if (k > last) k = last;
      // guard against rounding placing x just outside the computed segment
      if (k < last && x >= nodes_[k + 1]) ++k;
      if (k > 0 && x < nodes_[k]) --k;
      return k;
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    if (it == nodes_.begin()) return 0;
    auto k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return std::min(k, last);
  }

  /// Hermite cubic of segment k at x.
  double eval_segment(std::size_t k, double x) const {
    const double h = nodes_[k + 1] - nodes_[k];
    const double t = (x - nodes_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * values_[k] + h10 * h * slopes_[k] + h01 * values_[k + 1] + h11 * h * slopes_[k + 1];
  }

  double derivative_segment(std::size_t k, double x) const {
    const double h = nodes_[k + 1] - nodes_[k];
    const double t = (x - nodes_[k]) / h;
    const double t2 = t * t;
    const double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1;
    const double d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
    return (d00 * values_[k] + d01 * values_[k + 1]) / h + d10 * slopes_[k] + d11 * slopes_[k + 1];
  }

  /// Clamp x into [front, back] if within tolerance, else throw OutOfRange.
  double clamp(double x) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(nodes_.back() - nodes_.front()));
    if (x < nodes_.front()) {
      if (x < nodes_.front() - tol)
        throw OutOfRange("abscissa " + std::to_string(x) + " below grid start " + std::to_string(nodes_.front()));
      return nodes_.front();
    }
    if (x > nodes_.back()) {
      if (x > nodes_.back() + tol)
        throw OutOfRange("abscissa " + std::to_string(x) + " above grid end " + std::to_string(nodes_.back()));
      return nodes_.back();
    }
    return x;
  }

  double operator()(double x) const {
    x = clamp(x);
    return eval_segment(segment(x), x);
  }

  double derivative(double x) const {
    x = clamp(x);
    return derivative_segment(segment(x), x);
  }

 private:
  void compute_slopes() {
    const std::size_t n = nodes_.size();
    slopes_.assign(n, 0.0);
    std::vector<double> h(n - 1), del(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = nodes_[k + 1] - nodes_[k];
      del[k] = (values_[k + 1] - values_[k]) / h[k];
    }
    if (n == 2) {
      slopes_[0] = slopes_[1] = del[0];
      return;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (del[k - 1] * del[k] <= 0.0) {
        slopes_[k] = 0.0;
      } else {
        const double w1 = 2 * h[k] + h[k - 1], w2 = h[k] + 2 * h[k - 1];
        slopes_[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3 * d0)) return 3 * d0;
      return d;
    };
    slopes_[0] = end_slope(h[0], h[1], del[0], del[1]);
    slopes_[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
  }

  std::vector<double> nodes_, values_, slopes_;
  bool uniform_ = false;
};

inline double interp1(const GridFn1D& f, double x) { return f(x); }

/// Inverse of a strictly increasing GridFn1D.
class MonotoneInverse {
 public:
  MonotoneInverse() = default;
  explicit MonotoneInverse(GridFn1D f) : f_(std::move(f)) {
    const auto& v = f_.values();
    for (std::size_t k = 1; k < v.size(); ++k)
      if (!(v[k] > v[k - 1])) throw NotMonotone("values are not strictly increasing at node " + std::to_string(k));
  }

  const GridFn1D& function() const { return f_; }
  double min() const { return f_.values().front(); }
  double max() const { return f_.values().back(); }

  /// x with |f(x) - y| < 1e-10 (in practice to rounding).
  double operator()(double y) const {
    const auto& v = f_.values();
    const auto& x = f_.nodes();
    const double tol = 1e-12 * std::max(1.0, std::abs(v.back() - v.front()));
    if (y < v.front()) {
      if (y < v.front() - tol) throw OutOfRange("value below range of monotone function");
      return x.front();
    }
    if (y > v.back()) {
      if (y > v.back() + tol) throw OutOfRange("value above range of monotone function");
      return x.back();
    }
    auto it = std::upper_bound(v.begin(), v.end(), y);
    std::size_t k = (it == v.begin()) ? 0 : static_cast<std::size_t>(it - v.begin()) - 1;
    k = std::min(k, v.size() - 2);
    if (y == v[k]) return x[k];
    if (y == v[k + 1]) return x[k + 1];
    double lo = x[k], hi = x[k + 1];
    // secant start, then safeguarded Newton on the Hermite piece
    double xc = lo + (hi - lo) * (y - v[k]) / (v[k + 1] - v[k]);
    for (int it_count = 0; it_count < 100; ++it_count) {
      const double r = f_.eval_segment(k, xc) - y;
      if (r == 0.0) return xc;
      if (r > 0.0) hi = xc; else lo = xc;
      const double d = f_.derivative_segment(k, xc);
      double next = (d > 0.0) ? xc - r / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - xc) <= 1e-16 * std::max(1.0, std::abs(xc)) || hi - lo <= 1e-16 * std::max(1.0, std::abs(xc)))
        return next;
      xc = next;
    }
    return xc;
  }

 private:
  GridFn1D f_;
};

inline double invert_monotone(const GridFn1D& f, double y) { return MonotoneInverse(f)(y); }

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Composite trapezoid rule with n_sub uniform subintervals.
template <typename F>
  requires std::is_invocable_r_v<double, F, double>
double trapz(F&& f, double a, double b, int n_sub) {
  if (n_sub < 1) n_sub = 1;
  const double h = (b - a) / n_sub;
  double s = 0.5 * (f(a) + f(b));
  for (int k = 1; k < n_sub; ++k) s += f(a + h * k);
  return s * h;
}

/// Trapezoid over the sample points of f restricted to [a, b]; the
/// endpoints are interpolated when they fall between nodes.
inline double trapz(const GridFn1D& f, double a, double b) {
  a = f.clamp(a);
  b = f.clamp(b);
  if (b < a) return -trapz(f, b, a);
  if (a == b) return 0.0;
  const auto& x = f.nodes();
  const auto& y = f.values();
  double prev_x = a, prev_y = f(a), s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] <= a) continue;
    if (x[k] >= b) break;
    s += 0.5 * (x[k] - prev_x) * (y[k] + prev_y);
    prev_x = x[k];
    prev_y = y[k];
  }
  s += 0.5 * (b - prev_x) * (f(b) + prev_y);
  return s;
}

inline double trapz(const GridFn1D& f) { return trapz(f, f.front(), f.back()); }

/// Trapezoid over paired samples.
inline double trapz(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return s;
}

/// Running trapezoid integral starting at zero.
inline std::vector<double> cumulative_trapz(std::span<const double> x, std::span<const double> y) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t k = 1; k < x.size(); ++k) out[k] = out[k - 1] + 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return out;
}

// ---------------------------------------------------------------------------
// Decay-rate fitting
// ---------------------------------------------------------------------------

/// Least-squares slope of log(norm) against time over the trailing 80% of
/// the time span. Positive result means decay.
inline double fit_decay_rate(std::span<const double> times, std::span<const double> norms) {
  if (times.size() != norms.size()) throw OutOfRange("times and norms differ in length");
  if (times.size() < 10) throw OutOfRange("decay fit needs at least 10 samples");
  const double t0 = times.front() + 0.2 * (times.back() - times.front());
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(norms[k] > 0.0)) throw NonPositiveNorm("norm sample " + std::to_string(k) + " is not positive");
    if (times[k] < t0) continue;
    const double y = std::log(norms[k]);
    st += times[k];
    sy += y;
    stt += times[k] * times[k];
    sty += times[k] * y;
    ++count;
  }
  if (count < 2) throw OutOfRange("decay fit window holds fewer than two samples");
  const double c = static_cast<double>(count);
  const double slope = (c * sty - st * sy) / (c * stt - st * st);
  return -slope;
}

// ---------------------------------------------------------------------------
// Two-dimensional grid functions
// ---------------------------------------------------------------------------

struct UniformAxis {
  double start = 0.0;
  double step = 1.0;
  int count = 0;

  double at(int k) const { return start + step * k; }
  double end() const { return at(count - 1); }
};

/// Value known at a fractional grid position, in units of grid cells.
struct GridSample {
  double u1, u2, value;
};

/// Fill unknown nodes of a box-shaped array by extrapolation from known ones.
///
/// Nodes up to `fit_layers` cells (Chebyshev distance) from the known set
/// take the value of a local least-squares polynomial fitted to the known
/// nodes around them and to the optional scattered samples `extra`. The
/// degree is 3 when the neighbourhood supports it and lower otherwise.
/// Farther nodes get the mean of their filled neighbours, layer by layer.
/// Layout is `values[i1 * n2 + i2]`.

inline void extrapolate_fill(std::vector<double>& values, const std::vector<char>& known, int n1, int n2,
                             const std::vector<GridSample>& extra = {}, int fit_layers = 3) {
  const std::array<std::pair<int, int>, 8> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  auto idx = [n2](int a, int b) { return static_cast<std::size_t>(a) * n2 + b; };
  auto inside = [n1, n2](int a, int b) { return a >= 0 && a < n1 && b >= 0 && b < n2; };
  const std::size_t total = static_cast<std::size_t>(n1) * n2;
  std::vector<int> depth(total, -1);
  std::vector<std::size_t> frontier, next;
  for (std::size_t q = 0; q < total; ++q)
    if (known[q]) {
      depth[q] = 0;
      frontier.push_back(q);
    }
  if (frontier.empty()) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  std::vector<std::vector<std::size_t>> layers;
  for (int d = 1; !frontier.empty(); ++d) {
    next.clear();
    for (std::size_t q : frontier) {
      const int a = static_cast<int>(q / n2), b = static_cast<int>(q % n2);
      for (auto [da, db] : dirs) {
        if (!inside(a + da, b + db) || depth[idx(a + da, b + db)] >= 0) continue;
        depth[idx(a + da, b + db)] = d;
        next.push_back(idx(a + da, b + db));
      }
    }
    if (!next.empty()) layers.push_back(next);
    frontier.swap(next);
  }

  auto monomials = [](int degree, double u, double v, double* out) {
    int c = 0;
    for (int total_deg = 0; total_deg <= degree; ++total_deg)
      for (int py = 0; py <= total_deg; ++py) {
        const int px = total_deg - py;
        out[c++] = std::pow(u, px) * std::pow(v, py);
      }
    return c;
  };
  std::vector<double> fitted(total, 0.0);
  for (int d = 0; d < static_cast<int>(layers.size()) && d < fit_layers; ++d) {
    for (std::size_t q : layers[d]) {
      const int a = static_cast<int>(q / n2), b = static_cast<int>(q % n2);
      const int radius = d + 3;
      std::vector<GridSample> pts;
      for (int da = -radius; da <= radius; ++da)
        for (int db = -radius; db <= radius; ++db)
          if (inside(a + da, b + db) && known[idx(a + da, b + db)])
            pts.push_back(GridSample{static_cast<double>(da), static_cast<double>(db), values[idx(a + da, b + db)]});
      for (const auto& e : extra)
        if (std::abs(e.u1 - a) <= radius && std::abs(e.u2 - b) <= radius) pts.push_back(GridSample{e.u1 - a, e.u2 - b, e.value});
      double value = 0.0;
      bool done = false;
      for (int degree = 3; degree >= 1 && !done; --degree) {
        const int terms = (degree + 1) * (degree + 2) / 2;
        if (static_cast<int>(pts.size()) < terms + 2) continue;
        Eigen::MatrixXd M(static_cast<Eigen::Index>(pts.size()), terms);
        Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
        double row[10];
        for (std::size_t r = 0; r < pts.size(); ++r) {
          monomials(degree, pts[r].u1 / radius, pts[r].u2 / radius, row);
          for (int c = 0; c < terms; ++c) M(static_cast<Eigen::Index>(r), c) = row[c];
          y(static_cast<Eigen::Index>(r)) = pts[r].value;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) < 1e-3 * sv(0)) continue;
        value = svd.solve(y)(0);
        done = true;
      }
      if (!done) {
        for (const auto& pt : pts) value += pt.value;
        value /= static_cast<double>(pts.size());
      }
      fitted[q] = value;
    }
  }
  for (int d = 0; d < static_cast<int>(layers.size()); ++d) {
    for (std::size_t q : layers[d]) {
      if (d < fit_layers) continue;
      const int a = static_cast<int>(q / n2), b = static_cast<int>(q % n2);
      double sum = 0.0;
      int count = 0;
      for (auto [da, db] : dirs) {
        if (!inside(a + da, b + db)) continue;
        const auto r = idx(a + da, b + db);
        if (depth[r] >= 0 && depth[r] < d + 1) {
          sum += depth[r] == 0 ? values[r] : fitted[r];
          ++count;
        }
      }
      fitted[q] = sum / count;
    }
  }
  for (const auto& layer : layers)
    for (std::size_t q : layer) values[q] = fitted[q];
}

enum class Side { above, below, automatic };

/// Grid function on a box that is valid only on a masked sub-domain and may
/// be split by a separation curve into two pieces.
///
/// `sheet_above` holds the piece on the `in_above` side of the curve and
/// `sheet_below` the other one; each sheet is extended smoothly over the
/// whole box so that bilinear cells never straddle the kink. When no
/// classifier is set the function is single-valued and both sheets coincide.
class PiecewiseGridFn2D {
 public:
  UniformAxis axis1, axis2;
  std::vector<double> sheet_above, sheet_below;
  std::vector<char> mask;
  /// axis2 position of the separation curve at each axis1 node (NaN where absent)
  std::vector<double> curve;
  std::function<bool(double, double)> in_above;
  std::function<bool(double, double)> in_domain;

  PiecewiseGridFn2D() = default;
  PiecewiseGridFn2D(UniformAxis a1, UniformAxis a2)
      : axis1(a1), axis2(a2),
        sheet_above(static_cast<std::size_t>(a1.count) * a2.count, 0.0),
        sheet_below(sheet_above.size(), 0.0),
        mask(sheet_above.size(), 1),
        curve(static_cast<std::size_t>(a1.count), std::numeric_limits<double>::quiet_NaN()) {}

  std::size_t index(int i1, int i2) const { return static_cast<std::size_t>(i1) * axis2.count + i2; }

  bool piecewise() const { return static_cast<bool>(in_above); }

  bool above(double a, double b) const { return !in_above || in_above(a, b); }

  const std::vector<double>& sheet(Side side, double a, double b) const {
    if (side == Side::automatic) side = above(a, b) ? Side::above : Side::below;
    return side == Side::above ? sheet_above : sheet_below;
  }

  /// Node value on its own side of the separation curve.
  double node(int i1, int i2) const {
    const double a = axis1.at(i1), b = axis2.at(i2);
    return sheet(Side::automatic, a, b)[index(i1, i2)];
  }

  bool inside(double a, double b) const {
    if (in_domain) return in_domain(a, b);
    const double t1 = 1e-9 * std::max(1.0, std::abs(axis1.step)), t2 = 1e-9 * std::max(1.0, std::abs(axis2.step));
    return a >= axis1.start - t1 && a <= axis1.end() + t1 && b >= axis2.start - t2 && b <= axis2.end() + t2;
  }

 private:
  static std::pair<int, double> locate(const UniformAxis& ax, double x, int width) {
    const double t = (x - ax.start) / ax.step;
    int k = static_cast<int>(std::floor(t));
    k = std::clamp(k, 0, std::max(0, ax.count - width));
    return {k, t - k};
  }

 public:
  double bilinear(const std::vector<double>& v, double a, double b) const {
    auto [i, ta] = locate(axis1, a, 2);
    auto [j, tb] = locate(axis2, b, 2);
    const double v00 = v[index(i, j)], v10 = v[index(i + 1, j)];
    const double v01 = v[index(i, j + 1)], v11 = v[index(i + 1, j + 1)];
    return (1 - ta) * (1 - tb) * v00 + ta * (1 - tb) * v10 + (1 - ta) * tb * v01 + ta * tb * v11;
  }

  /// Tensor-product cubic Lagrange interpolation of one sheet.
  double cubic(const std::vector<double>& v, double a, double b) const {
    if (axis1.count < 4 || axis2.count < 4) return bilinear(v, a, b);
    auto weights = [](const UniformAxis& ax, double x) {
      const double t = (x - ax.start) / ax.step;
      int k = static_cast<int>(std::floor(t)) - 1;
      k = std::clamp(k, 0, ax.count - 4);
      const double u = t - k;  // position relative to stencil node 0
      std::array<double, 4> w{};
      for (int p = 0; p < 4; ++p) {
        double l = 1.0;
        for (int q = 0; q < 4; ++q)
          if (q != p) l *= (u - q) / static_cast<double>(p - q);
        w[p] = l;
      }
      return std::pair{k, w};
    };
    auto [i0, wa] = weights(axis1, a);
    auto [j0, wb] = weights(axis2, b);
    double s = 0.0;
    for (int p = 0; p < 4; ++p) {
      double row = 0.0;
      for (int q = 0; q < 4; ++q) row += wb[q] * v[index(i0 + p, j0 + q)];
      s += wa[p] * row;
    }
    return s;
  }
};

/// Bilinear interpolation on the sheet selected by `side`.
inline double interp2(const PiecewiseGridFn2D& f, double a, double b, Side side = Side::automatic) {
  if (!f.inside(a, b))
    throw OutsideDomain("point (" + std::to_string(a) + ", " + std::to_string(b) + ") lies outside the grid domain");
  return f.bilinear(f.sheet(side, a, b), a, b);
}

}  // namespace pidebs

#endif  // PIDEBS_NUMERICS_HPP
