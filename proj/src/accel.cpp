// SPDX-License-Identifier: Apache-2.0
#include "rlddu/accel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rlddu::accel {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

/// In-place Cholesky solve with explicit counted loops. `a` must be Hermitian
/// PD; throws otherwise. Returns the MAC count through `macs`.
cmat chol_solve_counted(cmat a, cmat rhs, std::uint64_t& macs) {
  const int n = static_cast<int>(a.rows());
  require(a.cols() == n && rhs.rows() == n, "chol_solve: shape mismatch");
  // lower Cholesky factor in place
  for (int j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (int p = 0; p < j; ++p) {
      d -= std::norm(a(j, p));
      ++macs;
    }
    if (!(d > 0.0)) throw std::runtime_error("chol_solve: matrix not positive definite");
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (int i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (int p = 0; p < j; ++p) {
        s -= a(i, p) * std::conj(a(j, p));
        ++macs;
      }
      a(i, j) = s / l;
      ++macs;
    }
  }
  // forward then backward substitution per column
  const int m = static_cast<int>(rhs.cols());
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < n; ++i) {
      cplx s = rhs(i, c);
      for (int p = 0; p < i; ++p) {
        s -= a(i, p) * rhs(p, c);
        ++macs;
      }
      rhs(i, c) = s / a(i, i).real();
      ++macs;
    }
    for (int i = n - 1; i >= 0; --i) {
      cplx s = rhs(i, c);
      for (int p = i + 1; p < n; ++p) {
        s -= std::conj(a(p, i)) * rhs(p, c);
        ++macs;
      }
      rhs(i, c) = s / a(i, i).real();
      ++macs;
    }
  }
  return rhs;
}

std::vector<int> rank_by_offdiag(const std::vector<double>& energy, int q_cap, double threshold) {
  const int n = static_cast<int>(energy.size());
  const double top = *std::max_element(energy.begin(), energy.end());
  std::vector<int> picked;
  if (top <= 0.0) return picked;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return energy[static_cast<std::size_t>(a)] > energy[static_cast<std::size_t>(b)];
  });
  for (int i : order) {
    if (static_cast<int>(picked.size()) >= q_cap) break;
    if (energy[static_cast<std::size_t>(i)] >= threshold * top &&
        energy[static_cast<std::size_t>(i)] > 0.0)
      picked.push_back(i);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

BeamSupport prune_support(const channel::ChannelStats& stats, double energy_keep, int b_cap) {
  require(energy_keep > 0.0 && energy_keep <= 1.0, "prune_support: energy_keep out of (0,1]");
  require(b_cap >= 1, "prune_support: b_cap must be positive");
  BeamSupport sup;
  for (int k = 0; k < stats.k_users; ++k) {
    std::vector<double> energy(static_cast<std::size_t>(stats.m_t), 0.0);
    double total = 0.0;
    for (int f = 0; f < stats.n_sub; ++f) {
      const auto& m = stats.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      const auto& v = stats.var[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      for (int q = 0; q < stats.m_t; ++q) {
        const double e = m.col(q).squaredNorm() + v.col(q).sum();
        energy[static_cast<std::size_t>(q)] += e;
        total += e;
      }
    }
    std::vector<int> order(static_cast<std::size_t>(stats.m_t));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return energy[static_cast<std::size_t>(a)] > energy[static_cast<std::size_t>(b)];
    });
    std::vector<int> cols;
    double acc = 0.0;
    for (int q : order) {
      if (static_cast<int>(cols.size()) >= b_cap) break;
      if (total > 0.0 && acc >= energy_keep * total) break;
      if (energy[static_cast<std::size_t>(q)] <= 0.0) break;
      cols.push_back(q);
      acc += energy[static_cast<std::size_t>(q)];
    }
    std::sort(cols.begin(), cols.end());
    sup.cols.push_back(std::move(cols));
    sup.retained.push_back(total > 0.0 ? acc / total : 1.0);
  }
  return sup;
}

StructuredSolve structured_inverse(const StructuredMatrix& m, const cmat& rhs, FlopCounter* fc) {
  const int n = static_cast<int>(m.diag.size());
  require(rhs.rows() == n, "structured_inverse: rhs shape");
  const int q = static_cast<int>(m.block_idx.size());
  require(m.block.rows() == q && m.block.cols() == q, "structured_inverse: block shape");

  std::vector<char> in_block(static_cast<std::size_t>(n), 0);
  for (int i : m.block_idx) in_block[static_cast<std::size_t>(i)] = 1;

  std::uint64_t macs = 0;
  cmat x(n, rhs.cols());
  for (int i = 0; i < n; ++i) {
    if (in_block[static_cast<std::size_t>(i)]) continue;
    if (!(m.diag(i) > 0.0)) throw std::runtime_error("structured_inverse: nonpositive diagonal");
    x.row(i) = rhs.row(i) / m.diag(i);
    macs += static_cast<std::uint64_t>(rhs.cols());
  }
  if (q > 0) {
    cmat sub(q, rhs.cols());
    for (int i = 0; i < q; ++i) sub.row(i) = rhs.row(m.block_idx[static_cast<std::size_t>(i)]);
    const cmat sol = chol_solve_counted(m.block, sub, macs);
    for (int i = 0; i < q; ++i) x.row(m.block_idx[static_cast<std::size_t>(i)]) = sol.row(i);
  }
  if (fc) fc->add("accel.structured_inverse", macs);

  StructuredSolve out;
  out.x = std::move(x);
  const double rn = rhs.norm();
  out.residual = rn > 0.0 ? (structured_apply(m, out.x) - rhs).norm() / rn : 0.0;
  return out;
}

cmat dense_solve_counted(const cmat& a, const cmat& rhs, FlopCounter* fc) {
  std::uint64_t macs = 0;
  cmat x = chol_solve_counted(a, rhs, macs);
  if (fc) fc->add("accel.dense_solve", macs);
  return x;
}

StructuredMatrix project_structured(const cmat& dense, const std::vector<int>& idx) {
  const int n = static_cast<int>(dense.rows());
  require(dense.cols() == n, "project_structured: square input required");
  StructuredMatrix m;
  m.diag = dense.diagonal().real();
  m.block_idx = idx;
  const int q = static_cast<int>(idx.size());
  m.block.resize(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      m.block(i, j) = dense(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  m.block = 0.5 * (m.block + m.block.adjoint().eval());
  return m;
}

StructuredSolve structured_solve_projected(const cmat& dense, const std::vector<int>& idx,
                                           const cmat& rhs, FlopCounter* fc) {
  const StructuredMatrix m = project_structured(dense, idx);
  StructuredSolve s = structured_inverse(m, rhs, fc);
  const double rn = rhs.norm();
  s.residual = rn > 0.0 ? (dense * s.x - rhs).norm() / rn : 0.0;
  return s;
}

cmat structured_apply(const StructuredMatrix& m, const cmat& x) {
  const int n = static_cast<int>(m.diag.size());
  require(x.rows() == n, "structured_apply: shape mismatch");
  cmat y = m.diag.asDiagonal() * x;
  const int q = static_cast<int>(m.block_idx.size());
  if (q == 0) return y;
  cmat sub(q, x.cols());
  for (int i = 0; i < q; ++i) sub.row(i) = x.row(m.block_idx[static_cast<std::size_t>(i)]);
  const cmat prod = m.block * sub;
  // the block overrides the diagonal on its support
  for (int i = 0; i < q; ++i) y.row(m.block_idx[static_cast<std::size_t>(i)]) = prod.row(i);
  return y;
}

std::vector<int> select_q_support(const cmat& dense, int q_cap, double threshold) {
  const int n = static_cast<int>(dense.rows());
  require(dense.cols() == n, "select_q_support: square input required");
  require(q_cap >= 0, "select_q_support: negative cap");
  std::vector<double> energy(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) energy[static_cast<std::size_t>(i)] += std::norm(dense(i, j));
  if (n == 0 || q_cap == 0) return {};
  return rank_by_offdiag(energy, q_cap, threshold);
}

std::vector<int> select_q_support(const StructuredMatrix& m, int q_cap, double threshold) {
  const int n = static_cast<int>(m.diag.size());
  require(q_cap >= 0, "select_q_support: negative cap");
  if (n == 0 || q_cap == 0) return {};
  std::vector<double> energy(static_cast<std::size_t>(n), 0.0);
  const int q = static_cast<int>(m.block_idx.size());
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      if (i != j)
        energy[static_cast<std::size_t>(m.block_idx[static_cast<std::size_t>(i)])] +=
            std::norm(m.block(i, j));
  return rank_by_offdiag(energy, q_cap, threshold);
}

std::vector<int> uniform_nodes(int n_sub, int count) {
  require(n_sub >= 1, "uniform_nodes: empty grid");
  require(count >= 3, "uniform_nodes: at least three nodes required");
  if (count >= n_sub) {
    std::vector<int> all(static_cast<std::size_t>(n_sub));
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<int> nodes;
  for (int j = 0; j < count; ++j) {
    const int f = static_cast<int>(std::lround(static_cast<double>(j) *
                                               static_cast<double>(n_sub - 1) /
                                               static_cast<double>(count - 1)));
    if (nodes.empty() || nodes.back() != f) nodes.push_back(f);
  }
  return nodes;
}

int node_window(const std::vector<int>& nodes, int f) {
  const int n = static_cast<int>(nodes.size());
  require(n >= 3, "node_window: need at least three nodes");
  int nearest = 0;
  int best = std::abs(nodes[0] - f);
  for (int j = 1; j < n; ++j) {
    const int d = std::abs(nodes[static_cast<std::size_t>(j)] - f);
    if (d < best) {
      best = d;
      nearest = j;
    }
  }
  return std::clamp(nearest - 1, 0, n - 3);
}

FlopModel flop_estimate(const SystemDims& dims, std::string_view algo, const FlopConstants& c) {
  require(c.b >= 1 && c.q >= 1 && c.f_tilde >= 1 && c.iters >= 1 && c.d >= 1 && c.c >= 1 && c.h >= 1,
          "flop_estimate: constants must be positive");
  const double mt = dims.m_t, mr = dims.m_r, fs = dims.n_sub, k = dims.k_users;
  const double b = c.b, q = c.q, ft = c.f_tilde, it = c.iters, d = c.d, ch = c.c, h = c.h;
  FlopModel m;
  m.algo = std::string(algo);
  if (algo == "swmmse") {
    m.terms = {{"grid", mt * mt * mr * fs * k * it}, {"inverse", mt * mt * mt * it}};
  } else if (algo == "po_wmmse") {
    m.terms = {{"pruned_grid", b * b * mr * mr * fs * k * it},
               {"support_terms", q * q * mr * k * it},
               {"structured_inverse", (mt + q * q * q) * it}};
  } else if (algo == "rlddu") {
    m.terms = {{"pruned_grid", b * b * mr * mr * ft * k * it},
               {"support_terms", q * q * mr * k * it},
               {"structured_inverse", (mt + q * q * q) * it},
               {"policy_net", (d + ch * ch) * h * h * ch * b * mr * ft * k}};
  } else {
    throw std::invalid_argument("flop_estimate: unknown algorithm tag");
  }
  for (const auto& [_, v] : m.terms) m.total += v;
  return m;
}

}  // namespace rlddu::accel
