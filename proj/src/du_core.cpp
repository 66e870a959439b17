// SPDX-License-Identifier: Apache-2.0
#include "rlddu/du_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rlddu/swmmse.hpp"

namespace rlddu::du {

namespace {

cmat herm(const cmat& a) { return 0.5 * (a + a.adjoint().eval()); }

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_comp_entry(const cmat& m, int m_r, bool hermitian, const char* name) {
  require(m.rows() == m_r && m.cols() == m_r, "du_layer: compensation shape mismatch");
  require(m.allFinite(), "du_layer: nonfinite compensation entry");
  if (hermitian) {
    const double gap = (m - m.adjoint().eval()).norm();
    if (gap > 1e-10 * std::max(1.0, m.norm()))
      throw std::invalid_argument(std::string("du_layer: ") + name + " not Hermitian");
  }
}

void check_inputs(const LayerInputs& in, const SystemDims& dims) {
  in.stats.check_shapes();
  require(in.stats.m_t == dims.m_t && in.stats.m_r == dims.m_r &&
              in.stats.k_users == dims.k_users && in.stats.n_sub == dims.n_sub,
          "du_layer: stats dims mismatch");
  require(in.x_prev.domain == Domain::Beam, "du_layer: x_prev must be beam domain");
  require(in.x_prev.users() == dims.k_users, "du_layer: x_prev user count");
  for (const auto& x : in.x_prev.mats)
    require(x.rows() == dims.m_t && x.cols() == dims.m_r && x.allFinite(),
            "du_layer: bad precoder matrix");

  const auto& s = in.sampled;
  require(static_cast<int>(s.size()) >= 3, "du_layer: need at least three sampled nodes");
  require(s.front() == 0 && s.back() == dims.n_sub - 1,
          "du_layer: sampled nodes must include both grid endpoints");
  for (std::size_t j = 1; j < s.size(); ++j)
    require(s[j] > s[j - 1], "du_layer: sampled nodes must be strictly increasing");

  const auto shape = [&](const std::vector<std::vector<cmat>>& grid) {
    require(static_cast<int>(grid.size()) == dims.k_users, "du_layer: compensation user count");
    for (const auto& row : grid)
      require(row.size() == s.size(), "du_layer: compensation node count");
  };
  shape(in.comp.z_a);
  shape(in.comp.z_c);
  shape(in.comp.o_e);
  shape(in.comp.o_f);
  shape(in.comp.o_g);
  for (int k = 0; k < dims.k_users; ++k)
    for (std::size_t j = 0; j < s.size(); ++j) {
      const auto ku = static_cast<std::size_t>(k);
      check_comp_entry(in.comp.z_a[ku][j], dims.m_r, true, "z_a");
      check_comp_entry(in.comp.z_c[ku][j], dims.m_r, true, "z_c");
      check_comp_entry(in.comp.o_e[ku][j], dims.m_r, false, "o_e");
      check_comp_entry(in.comp.o_f[ku][j], dims.m_r, false, "o_f");
      check_comp_entry(in.comp.o_g[ku][j], dims.m_r, false, "o_g");
    }
}

std::vector<std::vector<int>> user_supports(const channel::ChannelStats& stats,
                                            const SystemDims& dims, const DuOptions& opts) {
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(dims.k_users));
  if (opts.dense_inverse) {
    std::vector<int> all(static_cast<std::size_t>(dims.m_t));
    std::iota(all.begin(), all.end(), 0);
    for (auto& c : cols) c = all;
    return cols;
  }
  const int cap = opts.b_cap > 0 ? opts.b_cap : dims.m_t;
  const accel::BeamSupport sup = accel::prune_support(stats, opts.energy_keep, cap);
  for (int k = 0; k < dims.k_users; ++k)
    cols[static_cast<std::size_t>(k)] = sup.cols[static_cast<std::size_t>(k)];
  return cols;
}

std::vector<int> union_support(const std::vector<std::vector<int>>& cols, int m_t) {
  std::vector<char> in(static_cast<std::size_t>(m_t), 0);
  for (const auto& c : cols)
    for (int q : c) in[static_cast<std::size_t>(q)] = 1;
  std::vector<int> u;
  for (int q = 0; q < m_t; ++q)
    if (in[static_cast<std::size_t>(q)]) u.push_back(q);
  return u;
}

}  // namespace

CompensationSet CompensationSet::zeros(int k_users, int n_nodes, int m_r, int layer_index) {
  CompensationSet c;
  c.layer_index = layer_index;
  const cmat z = cmat::Zero(m_r, m_r);
  const std::vector<cmat> row(static_cast<std::size_t>(n_nodes), z);
  c.z_a.assign(static_cast<std::size_t>(k_users), row);
  c.z_c = c.z_a;
  c.o_e = c.z_a;
  c.o_f = c.z_a;
  c.o_g = c.z_a;
  return c;
}

cmat expected_gram(const cmat& h_mean, const rmat& var, const cmat& m) {
  const int m_t = static_cast<int>(h_mean.cols());
  std::vector<int> all(static_cast<std::size_t>(m_t));
  std::iota(all.begin(), all.end(), 0);
  const GramTerm g = expected_gram_on(h_mean, var, m, all);
  cmat out = g.block;
  out.diagonal() += g.d.cast<cplx>();
  return out;
}

cmat expected_outer(const cmat& h_mean, const rmat& var, const cmat& s) {
  require(h_mean.rows() == var.rows() && h_mean.cols() == var.cols(),
          "expected_outer: mean/var shape mismatch");
  require(s.rows() == h_mean.cols() && s.cols() == h_mean.cols(),
          "expected_outer: inner matrix shape mismatch");
  cmat out = h_mean * s * h_mean.adjoint();
  for (int r = 0; r < h_mean.rows(); ++r) {
    double acc = 0.0;
    for (int p = 0; p < h_mean.cols(); ++p) acc += s(p, p).real() * var(r, p);
    out(r, r) += acc;
  }
  return herm(out);
}

cmat expected_outer_lowrank(const cmat& h_mean, const rmat& var, const cmat& x) {
  require(h_mean.rows() == var.rows() && h_mean.cols() == var.cols(),
          "expected_outer_lowrank: mean/var shape mismatch");
  require(x.rows() == h_mean.cols(), "expected_outer_lowrank: operand shape mismatch");
  const cmat t = h_mean * x;
  cmat out = t * t.adjoint();
  for (int r = 0; r < h_mean.rows(); ++r) {
    double acc = 0.0;
    for (int p = 0; p < h_mean.cols(); ++p) acc += x.row(p).squaredNorm() * var(r, p);
    out(r, r) += acc;
  }
  return herm(out);
}

cmat taylor_diag_inverse(const cmat& e_mat, const cmat& z, int* floored) {
  const int n = static_cast<int>(e_mat.rows());
  require(e_mat.cols() == n && z.rows() == n && z.cols() == n,
          "taylor_diag_inverse: shape mismatch");
  rvec d(n);
  double trace = 0.0;
  for (int i = 0; i < n; ++i) {
    d(i) = e_mat(i, i).real();
    if (!(d(i) > 0.0)) throw std::domain_error("taylor_diag_inverse: nonpositive diagonal");
    trace += d(i);
  }
  const double floor = 1e-12 * trace;
  for (int i = 0; i < n; ++i)
    if (d(i) < floor) {
      d(i) = floor;
      if (floored) ++*floored;
    }
  cmat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx lead = i == j ? cplx(2.0 / d(i), 0.0) : cplx(0.0, 0.0);
      out(i, j) = lead - e_mat(i, j) / (d(i) * d(j)) + z(i, j);
    }
  return herm(out);
}

GramTerm expected_gram_on(const cmat& h_mean, const rmat& var, const cmat& m,
                          const std::vector<int>& cols, accel::FlopCounter* fc) {
  const int m_r = static_cast<int>(h_mean.rows());
  const int m_t = static_cast<int>(h_mean.cols());
  require(var.rows() == m_r && var.cols() == m_t, "expected_gram: mean/var shape mismatch");
  require(m.rows() == m_r && m.cols() == m_r, "expected_gram: inner matrix shape mismatch");
  const int n = static_cast<int>(cols.size());

  GramTerm g;
  g.d = rvec::Zero(m_t);
  std::uint64_t macs = 0;
  for (int p = 0; p < m_t; ++p) {
    double acc = 0.0;
    for (int r = 0; r < m_r; ++r) {
      acc += m(r, r).real() * var(r, p);
      ++macs;
    }
    g.d(p) = acc;
  }

  cmat w(m_r, n);
  for (int q = 0; q < n; ++q) {
    w.col(q) = m * h_mean.col(cols[static_cast<std::size_t>(q)]);
    macs += static_cast<std::uint64_t>(m_r) * static_cast<std::uint64_t>(m_r);
  }
  g.block.resize(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      g.block(p, q) = h_mean.col(cols[static_cast<std::size_t>(p)]).dot(w.col(q));
      macs += static_cast<std::uint64_t>(m_r);
    }
  if (fc) fc->add("du.expected_gram", macs);
  return g;
}

Btilde assemble_btilde(const std::vector<std::vector<cmat>>& f_hat,
                       const std::vector<std::vector<GramTerm>>& g_hat,
                       const std::vector<int>& sampled, const SystemDims& dims) {
  const int n_nodes = static_cast<int>(sampled.size());
  require(n_nodes >= 3, "assemble_btilde: need at least three nodes");
  require(static_cast<int>(f_hat.size()) == dims.k_users &&
              static_cast<int>(g_hat.size()) == dims.k_users,
          "assemble_btilde: user count mismatch");
  const int m_t = static_cast<int>(g_hat[0][0].d.size());
  const int nb = static_cast<int>(g_hat[0][0].block.rows());

  Btilde b;
  b.d = rvec::Zero(m_t);
  b.block = cmat::Zero(nb, nb);
  for (int f = 0; f < dims.n_sub; ++f) {
    const int j0 = accel::node_window(sampled, f);
    const double f0 = sampled[static_cast<std::size_t>(j0)];
    const double f1 = sampled[static_cast<std::size_t>(j0 + 1)];
    const double f2 = sampled[static_cast<std::size_t>(j0 + 2)];
    for (int m = 0; m < dims.k_users; ++m) {
      const auto mu = static_cast<std::size_t>(m);
      const auto i0 = static_cast<std::size_t>(j0);
      const cmat fh = accel::lagrange_interp3(f0, f_hat[mu][i0], f1, f_hat[mu][i0 + 1], f2,
                                              f_hat[mu][i0 + 2], double(f));
      const rvec gd = accel::lagrange_interp3(f0, g_hat[mu][i0].d, f1, g_hat[mu][i0 + 1].d, f2,
                                              g_hat[mu][i0 + 2].d, double(f));
      const cmat gb = accel::lagrange_interp3(f0, g_hat[mu][i0].block, f1, g_hat[mu][i0 + 1].block,
                                              f2, g_hat[mu][i0 + 2].block, double(f));
      const double wm = dims.weights[mu];
      const double noise = wm * dims.noise_vars[mu] / dims.p_max * fh.trace().real();
      b.d.array() += noise;
      b.d += wm * gd;
      b.block += wm * gb;
    }
  }
  b.block = herm(b.block);
  return b;
}

PrecoderSet du_layer(const LayerInputs& in, const SystemDims& dims, const DuOptions& opts,
                     LayerDiagnostics* diag, accel::FlopCounter* fc) {
  check_inputs(in, dims);
  LayerDiagnostics local;
  const auto& sampled = in.sampled;
  const int n_nodes = static_cast<int>(sampled.size());
  const int m_r = dims.m_r;
  const int m_t = dims.m_t;
  const int k_users = dims.k_users;

  const std::vector<std::vector<int>> supp = user_supports(in.stats, dims, opts);
  const std::vector<int> uni = union_support(supp, m_t);
  std::vector<int> pos(static_cast<std::size_t>(m_t), -1);
  for (std::size_t i = 0; i < uni.size(); ++i) pos[static_cast<std::size_t>(uni[i])] = int(i);
  const int nu = static_cast<int>(uni.size());

  double p_tot = 0.0;
  for (const auto& x : in.x_prev.mats) p_tot += x.squaredNorm();

  std::vector<std::vector<cmat>> e_hat(static_cast<std::size_t>(k_users));
  std::vector<std::vector<cmat>> f_hat(static_cast<std::size_t>(k_users));
  std::vector<std::vector<GramTerm>> g_hat(static_cast<std::size_t>(k_users));
  for (auto& row : e_hat) row.resize(static_cast<std::size_t>(n_nodes));
  for (auto& row : f_hat) row.resize(static_cast<std::size_t>(n_nodes));
  for (auto& row : g_hat) row.resize(static_cast<std::size_t>(n_nodes));

  for (int j = 0; j < n_nodes; ++j) {
    const int f = sampled[static_cast<std::size_t>(j)];
    const auto fu = static_cast<std::size_t>(f);
    const auto ju = static_cast<std::size_t>(j);
    for (int k = 0; k < k_users; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const cmat& mean = in.stats.mean[ku][fu];
      const rmat& var = in.stats.var[ku][fu];

      cmat e_a = cmat::Zero(m_r, m_r);
      for (int m = 0; m < k_users; ++m)
        e_a += expected_outer_lowrank(mean, var, in.x_prev.mats[static_cast<std::size_t>(m)]);
      e_a += (dims.noise_vars[ku] / dims.p_max * p_tot) * cmat::Identity(m_r, m_r);
      e_a = herm(e_a);
      const cmat e_d = expected_outer_lowrank(mean, var, in.x_prev.mats[ku]);

      cmat a_inv, c_inv;
      if (p_tot > 0.0) {
        a_inv = taylor_diag_inverse(e_a, in.comp.z_a[ku][ju], &local.taylor_floors);
        c_inv = taylor_diag_inverse(herm(e_a - e_d), in.comp.z_c[ku][ju], &local.taylor_floors);
      } else {
        // zero transmit power leaves no usable expansion point; the layer
        // degenerates to a zero update below
        a_inv = cmat::Zero(m_r, m_r);
        c_inv = a_inv;
      }

      const cmat m_e = herm(c_inv + in.comp.o_e[ku][ju]);
      const GramTerm ge = expected_gram_on(mean, var, m_e, supp[ku], fc);
      cmat e(m_t, m_r);
      for (int p = 0; p < m_t; ++p) e.row(p) = ge.d(p) * in.x_prev.mats[ku].row(p);
      if (!supp[ku].empty()) {
        cmat xs(static_cast<int>(supp[ku].size()), m_r);
        for (std::size_t i = 0; i < supp[ku].size(); ++i)
          xs.row(static_cast<int>(i)) = in.x_prev.mats[ku].row(supp[ku][i]);
        const cmat bs = ge.block * xs;
        for (std::size_t i = 0; i < supp[ku].size(); ++i)
          e.row(supp[ku][i]) += bs.row(static_cast<int>(i));
      }
      e_hat[ku][ju] = std::move(e);

      f_hat[ku][ju] = herm(c_inv * e_d * a_inv + in.comp.o_f[ku][ju]);
      const cmat m_g = herm(f_hat[ku][ju] + in.comp.o_g[ku][ju]);
      const GramTerm gg = expected_gram_on(mean, var, m_g, supp[ku], fc);
      GramTerm scattered;
      scattered.d = gg.d;
      scattered.block = cmat::Zero(nu, nu);
      for (std::size_t a = 0; a < supp[ku].size(); ++a)
        for (std::size_t bcol = 0; bcol < supp[ku].size(); ++bcol)
          scattered.block(pos[static_cast<std::size_t>(supp[ku][a])],
                          pos[static_cast<std::size_t>(supp[ku][bcol])]) =
              gg.block(static_cast<int>(a), static_cast<int>(bcol));
      g_hat[ku][ju] = std::move(scattered);
    }
  }

  const Btilde bt = assemble_btilde(f_hat, g_hat, sampled, dims);

  cmat rhs = cmat::Zero(m_t, k_users * m_r);
  for (int k = 0; k < k_users; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    cmat acc = cmat::Zero(m_t, m_r);
    for (int f = 0; f < dims.n_sub; ++f) {
      const int j0 = accel::node_window(sampled, f);
      const auto i0 = static_cast<std::size_t>(j0);
      acc += accel::lagrange_interp3(sampled[i0], e_hat[ku][i0], sampled[i0 + 1],
                                     e_hat[ku][i0 + 1], sampled[i0 + 2], e_hat[ku][i0 + 2],
                                     double(f));
    }
    acc *= dims.weights[ku];
    if (acc.norm() == 0.0) ++local.degenerate_users;
    rhs.middleCols(k * m_r, m_r) = acc;
  }

  cmat x_all;
  if (rhs.norm() == 0.0) {
    local.degenerate_users = k_users;
    x_all = cmat::Zero(m_t, k_users * m_r);
  } else if (opts.dense_inverse) {
    cmat dense = cmat::Zero(m_t, m_t);
    dense.diagonal() = bt.d.cast<cplx>();
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nu; ++j)
        dense(uni[static_cast<std::size_t>(i)], uni[static_cast<std::size_t>(j)]) +=
            bt.block(i, j);
    x_all = accel::dense_solve_counted(dense, rhs, fc);
    local.solve_residual = (dense * x_all - rhs).norm() / rhs.norm();
    local.block_size = m_t;
  } else {
    accel::StructuredMatrix cand;
    cand.diag = bt.d;
    for (int i = 0; i < nu; ++i)
      cand.diag(uni[static_cast<std::size_t>(i)]) += bt.block(i, i).real();
    cand.block_idx = uni;
    cand.block = bt.block;
    for (int i = 0; i < nu; ++i) cand.block(i, i) = cand.diag(uni[static_cast<std::size_t>(i)]);
    const int cap = opts.q_cap > 0 ? opts.q_cap : m_t;
    const std::vector<int> qsel = accel::select_q_support(cand, cap, opts.q_threshold);
    accel::StructuredMatrix sm;
    sm.diag = cand.diag;
    sm.block_idx = qsel;
    sm.block.resize(static_cast<int>(qsel.size()), static_cast<int>(qsel.size()));
    for (std::size_t i = 0; i < qsel.size(); ++i)
      for (std::size_t j = 0; j < qsel.size(); ++j)
        sm.block(static_cast<int>(i), static_cast<int>(j)) =
            cand.block(pos[static_cast<std::size_t>(qsel[i])],
                       pos[static_cast<std::size_t>(qsel[j])]);
    const accel::StructuredSolve sol = accel::structured_inverse(sm, rhs, fc);
    x_all = sol.x;
    local.solve_residual = sol.residual;
    local.block_size = static_cast<int>(qsel.size());
  }

  PrecoderSet out;
  out.domain = Domain::Beam;
  out.mats.resize(static_cast<std::size_t>(k_users));
  for (int k = 0; k < k_users; ++k)
    out.mats[static_cast<std::size_t>(k)] = x_all.middleCols(k * m_r, m_r);
  out.update_power();
  if (diag) *diag = local;
  return out;
}

std::vector<CompensationSet> zero_compensation(int n_layers, int k_users, int n_nodes, int m_r) {
  std::vector<CompensationSet> all;
  all.reserve(static_cast<std::size_t>(n_layers));
  for (int i = 0; i < n_layers; ++i)
    all.push_back(CompensationSet::zeros(k_users, n_nodes, m_r, i));
  return all;
}

PrecoderSet run_du_network(const channel::ChannelStats& stats, const SystemDims& dims,
                           const PrecoderSet& x0, const std::vector<CompensationSet>& comps,
                           const std::vector<int>& sampled, const DuOptions& opts,
                           NetDiagnostics* diag, accel::FlopCounter* fc) {
  require(!comps.empty(), "run_du_network: at least one layer required");
  PrecoderSet x = x0;
  if (diag) diag->layers.clear();
  for (const auto& comp : comps) {
    LayerDiagnostics ld;
    x = du_layer({stats, x, comp, sampled}, dims, opts, &ld, fc);
    if (diag) diag->layers.push_back(ld);
  }
  if (x.power > 0.0) x = swmmse::scale_to_power(x, dims.p_max);
  return x;
}

}  // namespace rlddu::du
