#ifndef PIDEBS_IO_HPP
#define PIDEBS_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pidebs/errors.hpp"
#include "pidebs/kernel/solution.hpp"
#include "pidebs/sim.hpp"

namespace pidebs {

/// Shortest round-trip formatting used for every number written.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One sample of a two-dimensional table in long format.
struct KernelRow {
  int i = 0, j = 0;
  double z = 0.0, zeta = 0.0, value = 0.0;
};

/// Write node values of K (or L) for zeta <= z; off-diagonal elements are
/// written on the sheet of each node.
inline void write_kernel_csv(std::ostream& os, const std::vector<PiecewiseGridFn2D>& tables, int n) {
  os << "i,j,z,zeta,value\n";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto& t = tables[static_cast<std::size_t>(i * n + j)];
      for (int a = 0; a < t.axis1.count; ++a)
        for (int b = 0; b <= a && b < t.axis2.count; ++b)
          os << i << ',' << j << ',' << fmt(t.axis1.at(a)) << ',' << fmt(t.axis2.at(b)) << ',' << fmt(t.node(a, b)) << '\n';
    }
}

/// Canonical solution at the valid nodes; columns carry (xi, eta).
inline void write_canonical_csv(std::ostream& os, const KernelSolution& sol) {
  os << "i,j,xi,eta,value\n";
  for (int i = 0; i < sol.n; ++i)
    for (int j = 0; j < sol.n; ++j) {
      const auto& g = sol.G_of(i, j);
      for (int k = 0; k < g.axis1.count; ++k)
        for (int m = 0; m < g.axis2.count; ++m) {
          if (!g.mask.empty() && !g.mask[g.index(k, m)]) continue;
          os << i << ',' << j << ',' << fmt(g.axis1.at(k)) << ',' << fmt(g.axis2.at(m)) << ',' << fmt(g.node(k, m)) << '\n';
        }
    }
}

inline void write_a0_tilde_csv(std::ostream& os, const KernelSolution& sol) {
  os << "i,j,z,value\n";
  for (const auto& [key, f] : sol.A0_tilde)
    for (std::size_t k = 0; k < f.size(); ++k)
      os << key.first << ',' << key.second << ',' << fmt(f.nodes()[k]) << ',' << fmt(f.values()[k]) << '\n';
}

inline std::vector<KernelRow> read_kernel_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "i,j,z,zeta,value") throw ParseError("kernel table: unexpected header '" + line + "'");
  std::vector<KernelRow> rows;
  for (std::size_t no = 2; std::getline(is, line); ++no) {
    if (line.empty()) continue;
    KernelRow r;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 5) throw ParseError("kernel table line " + std::to_string(no) + ": expected 5 fields");
    try {
      r.i = std::stoi(f[0]);
      r.j = std::stoi(f[1]);
      r.z = std::stod(f[2]);
      r.zeta = std::stod(f[3]);
      r.value = std::stod(f[4]);
    } catch (const std::exception&) {
      throw ParseError("kernel table line " + std::to_string(no) + ": malformed number");
    }
    rows.push_back(r);
  }
  return rows;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,channel,z,value\n";
  for (std::size_t s = 0; s < tr.snapshots.size(); ++s)
    for (std::size_t i = 0; i < tr.snapshots[s].size(); ++i)
      for (std::size_t k = 0; k < tr.z.size(); ++k)
        os << fmt(tr.snapshot_times[s]) << ',' << i << ',' << fmt(tr.z[k]) << ',' << fmt(tr.snapshots[s][i][k]) << '\n';
}

inline void write_norms_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,l2_norm\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) os << fmt(tr.times[k]) << ',' << fmt(tr.l2_norms[k]) << '\n';
}

inline void write_control_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,channel,value\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    for (Eigen::Index i = 0; i < tr.controls[k].size(); ++i) os << fmt(tr.times[k]) << ',' << i << ',' << fmt(tr.controls[k][i]) << '\n';
}

/// Open a file for writing or throw.
inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  return os;
}

}  // namespace pidebs

#endif  // PIDEBS_IO_HPP
