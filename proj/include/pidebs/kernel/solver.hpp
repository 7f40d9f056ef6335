#ifndef PIDEBS_KERNEL_SOLVER_HPP
#define PIDEBS_KERNEL_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pidebs/coords.hpp"
#include "pidebs/errors.hpp"
#include "pidebs/kernel/coefficients.hpp"
#include "pidebs/model.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

struct SolverOptions {
  int grid_n = 51;
  double tol = 1e-3;
  int max_iter = 50;
  int atlas_grid = 2001;
  double inverse_tol = 1e-10;
  int inverse_max_iter = 500;
};

/// Node layout of the canonical domain of one kernel element.
///
/// Both axes share the spacing h = (phi_i(1) + phi_j(1)) / (N - 1) so that
/// the rows eta = 0 and the diagonal xi = eta pass through nodes.
struct CanonicalGrid {
  int i = 0, j = 0, s = 1;
  UniformAxis xi, eta;
  int row_zero = 0;
  std::vector<char> valid;
  std::vector<double> lower;  // eta_l at each column
  std::vector<double> left;   // xi_l at each row, NaN for empty rows
  std::vector<double> z, zeta;  // original coordinates of each node

  std::size_t index(int k, int m) const { return static_cast<std::size_t>(k) * eta.count + m; }
  std::size_t size() const { return static_cast<std::size_t>(xi.count) * eta.count; }
  double h() const { return xi.step; }
  bool above(int m) const { return m >= row_zero; }
  bool below(int m) const { return m <= row_zero; }
};

inline CanonicalGrid make_canonical_grid(const CoordinateAtlas& atlas, int i, int j, int N) {
  const auto& g = atlas.pair(i, j);
  CanonicalGrid cg;
  cg.i = i;
  cg.j = j;
  cg.s = g.s;
  const double h = g.c / (N - 1);
  const int m_lo = static_cast<int>(std::floor(g.b / h + 1e-9));
  const int m_hi = static_cast<int>(std::ceil(g.a / h - 1e-9));
  cg.xi = UniformAxis{0.0, h, N};
  cg.eta = UniformAxis{m_lo * h, h, m_hi - m_lo + 1};
  cg.row_zero = -m_lo;
  cg.valid.assign(cg.size(), 0);
  cg.z.assign(cg.size(), 0.0);
  cg.zeta.assign(cg.size(), 0.0);
  cg.lower.resize(static_cast<std::size_t>(N));
  const double eps = 1e-9 * h;
  for (int k = 0; k < N; ++k) {
    const double x = cg.xi.at(k);
    cg.lower[k] = atlas.eta_lower(i, j, x).first;
    const double top = std::min(x, 2 * g.a - x);
    for (int m = 0; m < cg.eta.count; ++m) {
      const double e = cg.eta.at(m);
      if (e < cg.lower[k] - eps || e > top + eps) continue;
      const auto idx = cg.index(k, m);
      cg.valid[idx] = 1;
      auto [r, sg] = atlas.rho_sigma(i, j, x, e);
      cg.z[idx] = atlas.z_of(i, r);
      cg.zeta[idx] = std::min(atlas.z_of(j, sg), cg.z[idx]);
    }
  }
  cg.left.assign(static_cast<std::size_t>(cg.eta.count), std::numeric_limits<double>::quiet_NaN());
  for (int m = 0; m < cg.eta.count; ++m) {
    const double e = cg.eta.at(m);
    if (e > g.a + eps || e < g.b - eps) continue;
    cg.left[m] = m >= cg.row_zero ? std::max(e, 0.0) : atlas.xi_left(i, j, std::max(e, g.b));
  }
  return cg;
}

/// Sup norms of one recorded increment together with its node values.
struct IncrementRecord {
  double sup_g = 0.0, sup_h = 0.0;
  std::vector<std::vector<float>> abs_g, abs_h;  // per element, per valid node
};

/// Increment history with the original coordinates of each recorded node.
struct IncrementHistory {
  std::vector<std::vector<double>> z, zeta;  // per element, per valid node
  std::vector<IncrementRecord> steps;
};

/// Successive approximation of the canonical kernel integral equations.
///
/// Increments live on two sheets per element (values on and above the
/// separation row eta = 0, and on and below it), each extended over the
/// whole bounding box by extrapolation so that interpolation never mixes
/// the two sides of the kink. Every integral of the update operators is a
/// fixed linear functional of the previous increment; these functionals are
/// assembled once as sparse weight lists ("taps").
class KernelIteration {
 public:
  struct Tap {
    std::uint32_t index;
    double weight;
  };

  KernelIteration(const CoefficientTables& coeff, const TargetSpec& target, int grid_n)
      : co_(coeff), at_(coeff.atlas()), pl_(coeff.plant()), target_(target), N_(grid_n) {
    if (grid_n < 5) throw GridTooCoarse("kernel grid needs at least 5 nodes per axis");
    n_ = pl_.n;
    std::size_t offset = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        grids_.push_back(make_canonical_grid(at_, i, j, N_));
        offsets_.push_back(offset);
        offset += 2 * grids_.back().size();
      }
    }
    store_size_ = offset;
    for (const auto& g : grids_) {
      std::vector<GridSample> samples;
      if (g.i != g.j) {
        for (int q = 0; q < 2 * (g.xi.count - 1) + 1; ++q) {
          const double x = 0.5 * q * g.h();
          const double u2 = (at_.eta_lower(g.i, g.j, x).first - g.eta.start) / g.h();
          if (q % 2 == 0 && std::abs(u2 - std::round(u2)) < 0.05) continue;
          samples.push_back(GridSample{0.5 * q, u2, 0.0});
        }
      }
      curve_samples_.push_back(std::move(samples));
    }
    build_columns();
    build_rows();
    build_diagonals();
  }

  int n() const { return n_; }
  int grid_n() const { return N_; }
  const CanonicalGrid& grid(int i, int j) const { return grids_[static_cast<std::size_t>(i * n_ + j)]; }
  std::size_t store_size() const { return store_size_; }

  /// Flat index of node (k, m) of element p on the given sheet (0 above, 1 below).
  std::size_t slot(int p, int sheet, int k, int m) const {
    const auto& g = grids_[p];
    return offsets_[p] + static_cast<std::size_t>(sheet) * g.size() + g.index(k, m);
  }

  /// Node value of an increment store.
  double node(const std::vector<double>& st, int p, int k, int m) const {
    return st[slot(p, grids_[p].above(m) ? 0 : 1, k, m)];
  }

  void set_node(std::vector<double>& st, int p, int k, int m, double v) const {
    const auto& g = grids_[p];
    const bool diag = g.i == g.j;
    if (g.above(m) || diag) st[slot(p, 0, k, m)] = v;
    if (g.below(m) || diag) st[slot(p, 1, k, m)] = v;
  }

  /// Extend every sheet over its bounding box. With `vanishing_trace` the
  /// off-diagonal values are also anchored to zero along the lower curve.
  void fill_ghosts(std::vector<double>& st, bool vanishing_trace = true) const {
    for (std::size_t p = 0; p < grids_.size(); ++p) {
      const auto& g = grids_[p];
      for (int sheet = 0; sheet < 2; ++sheet) {
        std::vector<char> known(g.size(), 0);
        for (int k = 0; k < g.xi.count; ++k)
          for (int m = 0; m < g.eta.count; ++m) {
            if (!g.valid[g.index(k, m)]) continue;
            const bool on_side = g.i == g.j || (sheet == 0 ? g.above(m) : g.below(m));
            known[g.index(k, m)] = on_side ? 1 : 0;
          }
        std::vector<double> v(st.begin() + static_cast<long>(offsets_[p] + sheet * g.size()),
                              st.begin() + static_cast<long>(offsets_[p] + (sheet + 1) * g.size()));
        extrapolate_fill(v, known, g.xi.count, g.eta.count, vanishing_trace && sheet == 1 ? curve_samples_[p] : std::vector<GridSample>{});
        std::copy(v.begin(), v.end(), st.begin() + static_cast<long>(offsets_[p] + sheet * g.size()));
      }
    }
  }

  /// Initial increments: boundary data of G and H.
  void init_iterates(std::vector<double>& dG, std::vector<double>& dH) const {
    dG.assign(store_size_, 0.0);
    dH.assign(store_size_, 0.0);
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      const int i = g.i, j = g.j;
      // G0 along the rows eta >= 0
      std::vector<double> g0(static_cast<std::size_t>(g.eta.count), 0.0);
      if (g.s > 0 && j >= pl_.m && !pl_.A0(i, j).is_zero()) {
        double acc = 0.0;
        for (int m = g.row_zero + 1; m < g.eta.count; ++m) {
          const double e0 = g.eta.at(m - 1), e1 = g.eta.at(m);
          acc -= trapz([&](double e) { return co_.c5(i, j, at_.z_of(i, std::clamp(e, 0.0, at_.phi1[i]))); }, e0, e1, 16);
          g0[m] = acc;
        }
      } else if (g.s < 0) {
        const Field1 gf = target_.artificial(i, j);
        if (!gf.is_zero())
          for (int m = g.row_zero; m < g.eta.count; ++m) g0[m] = gf(std::max(g.eta.at(m), 0.0));
      }
      for (int k = 0; k < g.xi.count; ++k)
        for (int m = 0; m < g.eta.count; ++m)
          if (g.valid[g.index(k, m)]) set_node(dG, p, k, m, g0[m]);

      // H0 along the columns
      const bool has_c1 = !pl_.F(i, j).is_zero();
      for (const auto& col : columns_[p]) {
        const double x = g.xi.at(col.k);
        const double hb = co_.h_boundary(i, j, x);
        double acc = 0.0;
        double prev = col.points.front().eta;
        auto c1_at = [&](double e) {
          auto [r, sg] = at_.rho_sigma(i, j, x, e);
          const double z = at_.z_of(i, r);
          return co_.c1(i, j, z, std::min(at_.z_of(j, sg), z));
        };
        for (const auto& pt : col.points) {
          if (has_c1 && pt.eta > prev) acc += trapz(c1_at, prev, pt.eta, 8);
          prev = pt.eta;
          if (pt.m >= 0) set_node(dH, p, col.k, pt.m, hb - acc / (4.0 * g.s));
        }
      }
    }
  }

  /// H update: column integrals of the right-hand side built from dG.
  /// `dG` must have its ghosts filled.
  std::vector<double> apply_FH(const std::vector<double>& dG) const {
    std::vector<double> out(store_size_, 0.0);
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      for (const auto& col : columns_[p]) {
        double acc = 0.0, prev_e = 0.0, prev_v = 0.0;
        bool first = true;
        for (const auto& pt : col.points) {
          double v = 0.0;
          for (std::uint32_t t = pt.tap_begin; t < pt.tap_end; ++t) v += s_taps_[t].weight * dG[s_taps_[t].index];
          if (!first) acc += 0.5 * (pt.eta - prev_e) * (v + prev_v);
          first = false;
          prev_e = pt.eta;
          prev_v = v;
          if (pt.m >= 0) set_node(out, p, col.k, pt.m, acc / (4.0 * g.s));
        }
      }
    }
    return out;
  }

  /// G update: row integrals of dH plus the diagonal boundary term.
  /// `dG` must have its ghosts filled; `first` marks the initial increment,
  /// the only one with nonzero H on the lower curve.
  std::vector<double> apply_FG(const std::vector<double>& dG, const std::vector<double>& dH, bool first) const {
    std::vector<double> out(store_size_, 0.0);
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      const int i = g.i, j = g.j;
      std::vector<double> R(static_cast<std::size_t>(g.eta.count), 0.0);
      if (!diagonals_[p].empty()) {
        const double c4 = co_.c4(j);
        double acc = 0.0, prev = 0.0, prev_e = 0.0;
        bool started = false;
        for (const auto& d : diagonals_[p]) {
          double v = 2.0 * node(dH, p, d.k, d.m) + c4 * node(dG, p, d.k, d.m);
          for (std::uint32_t t = d.tap_begin; t < d.tap_end; ++t) v += t_taps_[t].weight * dG[t_taps_[t].index];
          const double e = g.eta.at(d.m);
          if (started) acc += 0.5 * (e - prev_e) * (v + prev);
          started = true;
          prev = v;
          prev_e = e;
          R[d.m] = acc;
        }
      }
      for (const auto& row : rows_[p]) {
        double acc = 0.0;
        double prev_x = row.start_xi;
        double prev_v = row.start_node >= 0 ? node(dH, p, row.start_node, row.m) : (first ? co_.h_boundary(i, j, row.start_xi) : 0.0);
        for (int k = row.k_begin; k < row.k_end; ++k) {
          const double x = g.xi.at(k);
          const double v = node(dH, p, k, row.m);
          if (x > prev_x) acc += 0.5 * (x - prev_x) * (v + prev_v);
          prev_x = x;
          prev_v = v;
          set_node(out, p, k, row.m, acc + (row.m > g.row_zero ? R[row.m] : 0.0));
        }
      }
    }
    return out;
  }

  /// Largest node magnitude of an increment store.
  double sup(const std::vector<double>& st) const {
    double s = 0.0;
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      for (int k = 0; k < g.xi.count; ++k)
        for (int m = 0; m < g.eta.count; ++m)
          if (g.valid[g.index(k, m)]) s = std::max(s, std::abs(node(st, p, k, m)));
    }
    return s;
  }

  /// Grid function of element p built from a store (ghosts filled).
  PiecewiseGridFn2D sheet_function(const std::vector<double>& st, int p) const {
    const auto& g = grids_[p];
    PiecewiseGridFn2D f(g.xi, g.eta);
    std::copy(st.begin() + static_cast<long>(offsets_[p]), st.begin() + static_cast<long>(offsets_[p] + g.size()),
              f.sheet_above.begin());
    std::copy(st.begin() + static_cast<long>(offsets_[p] + g.size()), st.begin() + static_cast<long>(offsets_[p] + 2 * g.size()),
              f.sheet_below.begin());
    f.mask = g.valid;
    const int i = g.i, j = g.j;
    for (int k = 0; k < g.xi.count; ++k) f.curve[k] = i == j ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    if (i != j) f.in_above = [](double, double eta) { return eta >= 0.0; };
    const CoordinateAtlas* atlas = &at_;
    f.in_domain = [atlas, i, j](double xi, double eta) { return atlas->in_domain(i, j, xi, eta, 1e-9); };
    return f;
  }

 private:
  struct ColumnPoint {
    double eta;
    int m;  // node row, or -1 for the boundary point
    std::uint32_t tap_begin, tap_end;
  };
  struct Column {
    int k;
    std::vector<ColumnPoint> points;
  };
  struct Row {
    int m;
    double start_xi;
    int start_node;  // column index if the start is a node, else -1
    int k_begin, k_end;
  };
  struct DiagonalPoint {
    int k, m;
    std::uint32_t tap_begin, tap_end;
  };

  // Bilinear taps of element (i, k) at original point (z, zb) with weight w.
  void cross_taps(std::vector<Tap>& taps, int i, int k, double rho_i, double zb, double w) const {
    if (w == 0.0) return;
    const int p = i * n_ + k;
    const auto& g = grids_[p];
    auto [x, e] = at_.canonical_from_rho(i, k, rho_i, at_.phi[k](zb));
    const int sheet = (i == k || e >= 0.0) ? 0 : 1;
    const double t1 = x / g.xi.step;
    const double t2 = (e - g.eta.start) / g.eta.step;
    const int c1 = std::clamp(static_cast<int>(std::floor(t1)), 0, g.xi.count - 2);
    const int c2 = std::clamp(static_cast<int>(std::floor(t2)), 0, g.eta.count - 2);
    const double u = t1 - c1, v = t2 - c2;
    const double wts[4] = {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
    const int dk[4] = {0, 1, 0, 1}, dm[4] = {0, 0, 1, 1};
    for (int q = 0; q < 4; ++q) {
      if (wts[q] == 0.0) continue;
      taps.push_back(Tap{static_cast<std::uint32_t>(slot(p, sheet, c1 + dk[q], c2 + dm[q])), w * wts[q]});
    }
  }

  static int inner_count(int N, double len) { return static_cast<int>(std::ceil(N * len)) + 2; }

  // Right-hand side functional at canonical point (x, e) of element p.
  void rhs_taps(int p, double x, double e, int node_m, int node_k) {
    const auto& g = grids_[p];
    const int i = g.i, j = g.j;
    auto [r, sg] = at_.rho_sigma(i, j, x, e);
    const double z = at_.z_of(i, r);
    const double zeta = std::min(at_.z_of(j, sg), z);
    if (node_m >= 0) {
      const double w = co_.a(i, j, z, zeta) + co_.mu_c();
      const int sheet = g.above(node_m) ? 0 : 1;
      if (w != 0.0) s_taps_.push_back(Tap{static_cast<std::uint32_t>(slot(p, sheet, node_k, node_m)), w});
    }
    const bool on_diagonal = z - zeta < 1e-14;
    for (int k = 0; k < n_; ++k) {
      if (!(on_diagonal && k != i)) cross_taps(s_taps_, i, k, r, zeta, co_.c2(k, j, zeta));
      if (pl_.F(k, j).is_zero() || on_diagonal) continue;
      const int M = inner_count(N_, z - zeta);
      const double hq = (z - zeta) / (M - 1);
      for (int q = 0; q < M; ++q) {
        const double zb = q == M - 1 ? z : zeta + q * hq;
        if (q == M - 1 && k != i) continue;
        const double w = (q == 0 || q == M - 1 ? 0.5 : 1.0) * hq;
        cross_taps(s_taps_, i, k, r, zb, w * co_.c3(k, j, zeta, zb));
      }
    }
  }

  void build_columns() {
    columns_.resize(grids_.size());
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      const double eps = 1e-9 * g.h();
      for (int k = 0; k < g.xi.count; ++k) {
        Column col;
        col.k = k;
        const double el = g.lower[k];
        bool start_is_node = false;
        for (int m = 0; m < g.eta.count; ++m) {
          if (!g.valid[g.index(k, m)]) continue;
          if (std::abs(g.eta.at(m) - el) <= eps) start_is_node = true;
          break;
        }
        if (!start_is_node) col.points.push_back(ColumnPoint{el, -1, 0, 0});
        for (int m = 0; m < g.eta.count; ++m)
          if (g.valid[g.index(k, m)]) col.points.push_back(ColumnPoint{g.eta.at(m), m, 0, 0});
        for (auto& pt : col.points) {
          pt.tap_begin = static_cast<std::uint32_t>(s_taps_.size());
          rhs_taps(p, g.xi.at(k), pt.eta, pt.m, k);
          pt.tap_end = static_cast<std::uint32_t>(s_taps_.size());
        }
        columns_[p].push_back(std::move(col));
      }
    }
  }

  void build_rows() {
    rows_.resize(grids_.size());
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      const double eps = 1e-9 * g.h();
      for (int m = 0; m < g.eta.count; ++m) {
        int kb = -1, ke = -1;
        for (int k = 0; k < g.xi.count; ++k) {
          if (!g.valid[g.index(k, m)]) continue;
          if (kb < 0) kb = k;
          ke = k + 1;
        }
        if (kb < 0) continue;
        Row row{m, g.left[m], -1, kb, ke};
        if (std::isnan(row.start_xi)) row.start_xi = g.xi.at(kb);
        if (std::abs(g.xi.at(kb) - row.start_xi) <= eps) {
          row.start_node = kb;
          row.start_xi = g.xi.at(kb);
        }
        rows_[p].push_back(row);
      }
    }
  }

  void build_diagonals() {
    diagonals_.resize(grids_.size());
    for (int p = 0; p < static_cast<int>(grids_.size()); ++p) {
      const auto& g = grids_[p];
      const int i = g.i, j = g.j;
      if (!(g.s > 0 && j >= pl_.m)) continue;
      for (int m = g.row_zero; m < g.eta.count; ++m) {
        const int k = m - g.row_zero;
        if (k >= g.xi.count || !g.valid[g.index(k, m)]) break;
        DiagonalPoint d{k, m, static_cast<std::uint32_t>(t_taps_.size()), 0};
        const double r = std::clamp(g.eta.at(m), 0.0, at_.phi1[i]);
        const double z = at_.z_of(i, r);
        if (z > 0.0) {
          const int M = inner_count(N_, z);
          const double hq = z / (M - 1);
          for (int kk = 0; kk < n_; ++kk) {
            if (pl_.A0(kk, j).is_zero()) continue;
            for (int q = 0; q < M; ++q) {
              if (q == M - 1 && kk != i) continue;
              const double zb = q == M - 1 ? z : q * hq;
              const double w = (q == 0 || q == M - 1 ? 0.5 : 1.0) * hq;
              cross_taps(t_taps_, i, kk, r, zb, w * co_.c6(kk, j, zb));
            }
          }
        }
        d.tap_end = static_cast<std::uint32_t>(t_taps_.size());
        diagonals_[p].push_back(d);
      }
    }
  }

  const CoefficientTables& co_;
  const CoordinateAtlas& at_;
  const PlantModel& pl_;
  const TargetSpec& target_;
  int N_ = 0, n_ = 0;
  std::vector<CanonicalGrid> grids_;
  std::vector<std::size_t> offsets_;
  std::size_t store_size_ = 0;
  std::vector<std::vector<Column>> columns_;
  std::vector<std::vector<Row>> rows_;
  std::vector<std::vector<DiagonalPoint>> diagonals_;
  std::vector<Tap> s_taps_, t_taps_;
  std::vector<std::vector<GridSample>> curve_samples_;
};

/// Converged canonical solution.
struct CanonicalSolution {
  std::vector<PiecewiseGridFn2D> G, H;  // per element i * n + j
  int iterations = 0;
  double final_update_sup = 0.0;
  std::vector<double> update_sups;
  IncrementHistory history;
};

/// Run the successive approximation until the increments drop below tol.
inline CanonicalSolution solve_canonical(const KernelIteration& it, double tol, int max_iter, bool record_history = true) {
  if (!(tol > 0.0)) throw OutOfRange("tolerance must be positive");
  const int pairs = it.n() * it.n();
  std::vector<double> dG, dH;
  it.init_iterates(dG, dH);
  std::vector<long double> G(dG.size(), 0.0L), H(dH.size(), 0.0L);
  CanonicalSolution sol;
  if (record_history) {
    for (int p = 0; p < pairs; ++p) {
      const auto& g = it.grid(p / it.n(), p % it.n());
      std::vector<double> zs, zetas;
      for (std::size_t q = 0; q < g.size(); ++q)
        if (g.valid[q]) {
          zs.push_back(g.z[q]);
          zetas.push_back(g.zeta[q]);
        }
      sol.history.z.push_back(std::move(zs));
      sol.history.zeta.push_back(std::move(zetas));
    }
  }
  for (int l = 0;; ++l) {
    for (std::size_t q = 0; q < dG.size(); ++q) {
      G[q] += dG[q];
      H[q] += dH[q];
    }
    const double sg = it.sup(dG), sh = it.sup(dH);
    const double s = std::max(sg, sh);
    sol.update_sups.push_back(s);
    if (record_history) {
      IncrementRecord rec;
      rec.sup_g = sg;
      rec.sup_h = sh;
      for (int p = 0; p < pairs; ++p) {
        const auto& g = it.grid(p / it.n(), p % it.n());
        std::vector<float> ag, ah;
        for (int k = 0; k < g.xi.count; ++k)
          for (int m = 0; m < g.eta.count; ++m)
            if (g.valid[g.index(k, m)]) {
              ag.push_back(static_cast<float>(std::abs(it.node(dG, p, k, m))));
              ah.push_back(static_cast<float>(std::abs(it.node(dH, p, k, m))));
            }
        rec.abs_g.push_back(std::move(ag));
        rec.abs_h.push_back(std::move(ah));
      }
      sol.history.steps.push_back(std::move(rec));
    }
    if (s < tol) {
      sol.iterations = l;
      sol.final_update_sup = s;
      break;
    }
    if (l >= max_iter)
      throw NoConvergence("update sup " + std::to_string(s) + " still above " + std::to_string(tol) + " after " +
                          std::to_string(max_iter) + " sweeps");
    it.fill_ghosts(dG);
    auto nG = it.apply_FG(dG, dH, l == 0);
    auto nH = it.apply_FH(dG);
    dG = std::move(nG);
    dH = std::move(nH);
  }
  std::vector<double> Gd(G.begin(), G.end()), Hd(H.begin(), H.end());
  it.fill_ghosts(Gd);
  it.fill_ghosts(Hd, false);
  for (int p = 0; p < pairs; ++p) {
    sol.G.push_back(it.sheet_function(Gd, p));
    sol.H.push_back(it.sheet_function(Hd, p));
  }
  return sol;
}

/// Smallest M with |increment_l| <= M^(l+1) / l! (z - gamma zeta)^l at all
/// recorded nodes. Nodes where z - gamma zeta vanishes only enter at l = 0.
inline double growth_diagnostic(const IncrementHistory& history, double gamma) {
  double M = 0.0;
  for (std::size_t l = 0; l < history.steps.size(); ++l) {
    const auto& rec = history.steps[l];
    const double lf = std::lgamma(static_cast<double>(l) + 1.0);
    for (std::size_t p = 0; p < rec.abs_g.size(); ++p) {
      for (std::size_t q = 0; q < rec.abs_g[p].size(); ++q) {
        const double v = std::max(rec.abs_g[p][q], rec.abs_h[p][q]);
        if (v == 0.0) continue;
        const double d = history.z[p][q] - gamma * history.zeta[p][q];
        if (l > 0 && d <= 1e-12) continue;
        const double logm = (std::log(v) + lf - (l > 0 ? static_cast<double>(l) * std::log(d) : 0.0)) / (static_cast<double>(l) + 1.0);
        M = std::max(M, std::exp(logm));
      }
    }
  }
  return M;
}

/// True if every recorded increment respects the factorial envelope for M.
inline bool growth_bound_holds(const IncrementHistory& history, double gamma, double M) {
  for (std::size_t l = 0; l < history.steps.size(); ++l) {
    const auto& rec = history.steps[l];
    const double lf = std::lgamma(static_cast<double>(l) + 1.0);
    for (std::size_t p = 0; p < rec.abs_g.size(); ++p) {
      for (std::size_t q = 0; q < rec.abs_g[p].size(); ++q) {
        const double v = std::max(rec.abs_g[p][q], rec.abs_h[p][q]);
        if (v == 0.0) continue;
        const double d = history.z[p][q] - gamma * history.zeta[p][q];
        if (l > 0 && d <= 1e-12) continue;
        const double log_bound = (static_cast<double>(l) + 1.0) * std::log(M) - lf + (l > 0 ? static_cast<double>(l) * std::log(d) : 0.0);
        if (std::log(v) > log_bound + 1e-9) return false;
      }
    }
  }
  return true;
}

}  // namespace pidebs

#endif  // PIDEBS_KERNEL_SOLVER_HPP
