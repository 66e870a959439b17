// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "rlddu/channel.hpp"
#include "rlddu/du_core.hpp"
#include "rlddu/rng.hpp"
#include "rlddu/swmmse.hpp"

using namespace rlddu;
using namespace rlddu::du;

namespace {

cmat random_cmat(int r, int c, Rng& rng) {
  cmat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.cgauss();
  return m;
}

rmat random_var(int r, int c, Rng& rng, double scale) {
  rmat v(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) v(i, j) = scale * (0.2 + rng.uniform());
  return v;
}

cmat random_hpd(int n, Rng& rng) {
  const cmat a = random_cmat(n, n, rng);
  cmat m = a * a.adjoint() / double(n) + 0.5 * cmat::Identity(n, n);
  return 0.5 * (m + m.adjoint().eval());
}

cmat draw(const cmat& mean, const rmat& var, Rng& rng) {
  cmat h = mean;
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < h.cols(); ++j) h(i, j) += std::sqrt(var(i, j)) * rng.cgauss();
  return h;
}

/// Dense random stats on the full grid (no beam sparsity), block 0.
channel::ChannelStats dense_stats(const SystemDims& dims, std::uint64_t seed, double var_scale) {
  Rng rng(seed);
  channel::ChannelStats st;
  st.m_t = dims.m_t;
  st.m_r = dims.m_r;
  st.k_users = dims.k_users;
  st.n_sub = dims.n_sub;
  st.mean.resize(size_t(dims.k_users));
  st.var.resize(size_t(dims.k_users));
  st.omega.resize(size_t(dims.k_users));
  for (int k = 0; k < dims.k_users; ++k) {
    for (int f = 0; f < dims.n_sub; ++f) {
      st.mean[size_t(k)].push_back(random_cmat(dims.m_r, dims.m_t, rng));
      st.var[size_t(k)].push_back(random_var(dims.m_r, dims.m_t, rng, var_scale));
      st.omega[size_t(k)].push_back(rmat::Ones(dims.m_r, dims.m_t));
    }
  }
  st.aging.push_back(rmat::Constant(dims.k_users, dims.n_sub, 0.9));
  return st;
}

PrecoderSet random_beam_precoders(const SystemDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cmat> mats;
  for (int k = 0; k < dims.k_users; ++k)
    mats.push_back(std::sqrt(dims.p_max / (2.0 * dims.k_users * dims.m_t)) *
                   random_cmat(dims.m_t, dims.m_r, rng));
  return PrecoderSet::make(Domain::Beam, std::move(mats));
}

std::vector<int> all_nodes(int n_sub) {
  std::vector<int> s(static_cast<size_t>(n_sub));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

}  // namespace

TEST_CASE("expected_gram matches the deterministic and pure-variance special cases") {
  Rng rng(11);
  const cmat mean = random_cmat(2, 6, rng);
  const cmat m = random_hpd(2, rng);
  const rmat zero = rmat::Zero(2, 6);
  CHECK((expected_gram(mean, zero, m) - mean.adjoint() * m * mean).norm() < 1e-12);

  const rmat var = random_var(2, 6, rng, 1.0);
  const cmat g = expected_gram(cmat::Zero(2, 6), var, cmat::Identity(2, 2));
  for (int p = 0; p < 6; ++p) {
    CHECK(g(p, p).real() == doctest::Approx(var.col(p).sum()));
    for (int q = 0; q < 6; ++q)
      if (p != q) CHECK(std::abs(g(p, q)) < 1e-14);
  }
}

TEST_CASE("expected_gram and expected_outer match Monte Carlo at 1e5 draws") {
  Rng rng(23);
  const int m_r = 2, m_t = 8, n = 100000;
  const cmat mean = random_cmat(m_r, m_t, rng);
  const rmat var = random_var(m_r, m_t, rng, 0.8);
  const cmat m = random_hpd(m_r, rng);
  const cmat s = random_hpd(m_t, rng);

  cmat mc_g = cmat::Zero(m_t, m_t);
  cmat mc_o = cmat::Zero(m_r, m_r);
  Rng draws(77);
  for (int t = 0; t < n; ++t) {
    const cmat h = draw(mean, var, draws);
    mc_g += h.adjoint() * m * h;
    mc_o += h * s * h.adjoint();
  }
  mc_g /= double(n);
  mc_o /= double(n);

  const cmat cf_g = expected_gram(mean, var, m);
  const cmat cf_o = expected_outer(mean, var, s);
  CHECK((cf_g - mc_g).norm() / mc_g.norm() < 0.01);
  CHECK((cf_o - mc_o).norm() / mc_o.norm() < 0.01);
}

TEST_CASE("expected_outer_lowrank agrees with the dense form and the receive-covariance MC") {
  Rng rng(31);
  const int m_r = 2, m_t = 8;
  const cmat mean = random_cmat(m_r, m_t, rng);
  const rmat var = random_var(m_r, m_t, rng, 0.5);
  const cmat x = random_cmat(m_t, m_r, rng);
  const cmat s = x * x.adjoint();
  CHECK((expected_outer_lowrank(mean, var, x) - expected_outer(mean, var, s)).norm() < 1e-12);

  // full receive covariance: sum of per-user outer terms plus scaled noise
  SystemDims dims = SystemDims::make(m_t, m_r, 3, 12, 6, 2.0, 0.3);
  std::vector<cmat> xs;
  double p_tot = 0.0;
  for (int m = 0; m < 3; ++m) {
    xs.push_back(random_cmat(m_t, m_r, rng));
    p_tot += xs.back().squaredNorm();
  }
  cmat cf = cmat::Zero(m_r, m_r);
  for (const auto& xm : xs) cf += expected_outer_lowrank(mean, var, xm);
  cf += (dims.noise_vars[0] / dims.p_max * p_tot) * cmat::Identity(m_r, m_r);

  cmat mc = cmat::Zero(m_r, m_r);
  Rng draws(78);
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const cmat h = draw(mean, var, draws);
    for (const auto& xm : xs) mc += (h * xm) * (h * xm).adjoint();
    mc += (dims.noise_vars[0] / dims.p_max * p_tot) * cmat::Identity(m_r, m_r);
  }
  mc /= double(n);
  CHECK((cf - mc).norm() / mc.norm() < 0.01);
}

TEST_CASE("taylor_diag_inverse is exact on diagonal input and reproduces the 2x2 gap fixture") {
  const cmat z = cmat::Zero(3, 3);
  cmat d = cmat::Zero(3, 3);
  d.diagonal() << cplx(2.0), cplx(0.5), cplx(7.0);
  const cmat inv = taylor_diag_inverse(d, z);
  CHECK((inv - d.inverse()).norm() < 1e-12);
  CHECK((taylor_diag_inverse(cmat::Identity(3, 3), z) - cmat::Identity(3, 3)).norm() < 1e-14);

  cmat e(2, 2);
  e << cplx(2.0), cplx(0.1), cplx(0.1), cplx(3.0);
  const cmat approx = taylor_diag_inverse(e, cmat::Zero(2, 2));
  const cmat truth = e.inverse();
  const double gap = (approx - truth).norm();
  const double offdiag = std::sqrt(2.0) * 0.1;
  CHECK(gap <= offdiag * offdiag);
  CHECK(gap == doctest::Approx(1.0039841e-3).epsilon(1e-4));
}

TEST_CASE("taylor_diag_inverse congruence identity, error path and floor flag") {
  Rng rng(5);
  cmat e = random_hpd(3, rng);
  const rvec dv = rvec::LinSpaced(3, 0.5, 2.0);
  const cmat dm = dv.cast<cplx>().asDiagonal();
  const cmat lhs = taylor_diag_inverse(dm * e * dm, cmat::Zero(3, 3));
  const cmat rhs = dm.inverse() * taylor_diag_inverse(e, cmat::Zero(3, 3)) * dm.inverse();
  CHECK((lhs - rhs).norm() < 1e-12);

  cmat bad = e;
  bad(1, 1) = cplx(-0.1, 0.0);
  CHECK_THROWS_AS(taylor_diag_inverse(bad, cmat::Zero(3, 3)), std::domain_error);

  cmat tiny = cmat::Identity(2, 2);
  tiny(1, 1) = cplx(1e-20, 0.0);
  int floors = 0;
  const cmat out = taylor_diag_inverse(tiny, cmat::Zero(2, 2), &floors);
  CHECK(floors == 1);
  CHECK(out.allFinite());
}

TEST_CASE("z compensation shifts the taylor inverse additively") {
  Rng rng(6);
  const cmat e = random_hpd(2, rng);
  cmat z(2, 2);
  z << cplx(0.3), cplx(0.1, -0.2), cplx(0.1, 0.2), cplx(-0.4);
  const cmat base = taylor_diag_inverse(e, cmat::Zero(2, 2));
  const cmat comp = taylor_diag_inverse(e, z);
  CHECK((comp - base - z).norm() < 1e-12);
}

TEST_CASE("restricted gram term equals the dense gram on the support of sparse stats") {
  SystemDims dims = SystemDims::make(16, 2, 3, 24, 6, 1.0, 0.1);
  const auto stats = channel::make_scenario(dims, 5, 301, 3, 0.3);
  const auto sup = accel::prune_support(stats, 1.0, dims.m_t);
  Rng rng(9);
  const cmat m = random_hpd(2, rng);
  for (int k = 0; k < 3; ++k) {
    const auto& mean = stats.mean[size_t(k)][7];
    const auto& var = stats.var[size_t(k)][7];
    const GramTerm g = expected_gram_on(mean, var, m, sup.cols[size_t(k)]);
    const cmat dense = expected_gram(mean, var, m);
    cmat rebuilt = cmat::Zero(16, 16);
    rebuilt.diagonal() = g.d.cast<cplx>();
    const auto& cols = sup.cols[size_t(k)];
    for (size_t a = 0; a < cols.size(); ++a)
      for (size_t b = 0; b < cols.size(); ++b) rebuilt(cols[a], cols[b]) += g.block(a, b);
    CHECK((rebuilt - dense).norm() < 1e-12 * std::max(1.0, dense.norm()));
  }
}

TEST_CASE("gram term stays Hermitian PSD for PSD inner matrices") {
  Rng rng(41);
  const cmat mean = random_cmat(2, 8, rng);
  const rmat var = random_var(2, 8, rng, 0.7);
  const cmat m = random_hpd(2, rng);
  const cmat g = expected_gram(mean, var, m);
  CHECK((g - g.adjoint().eval()).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<cmat> es(g);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("assemble_btilde forced arithmetic: constant trace-only terms") {
  SystemDims dims = SystemDims::make(8, 2, 1, 12, 6, 2.0, 0.25);
  dims.weights[0] = 1.7;
  dims.validate();
  const double c = 0.9;
  const auto sampled = accel::uniform_nodes(12, 4);
  const int nn = int(sampled.size());
  std::vector<std::vector<cmat>> f_hat(1);
  std::vector<std::vector<GramTerm>> g_hat(1);
  for (int j = 0; j < nn; ++j) {
    f_hat[0].push_back(c / 2.0 * cmat::Identity(2, 2));
    GramTerm g;
    g.d = rvec::Zero(8);
    g.block = cmat::Zero(3, 3);
    g_hat[0].push_back(g);
  }
  const Btilde b = assemble_btilde(f_hat, g_hat, sampled, dims);
  const double want = c * (0.25 / 2.0) * 12.0 * 1.7;
  for (int i = 0; i < 8; ++i) CHECK(b.d(i) == doctest::Approx(want).epsilon(1e-12));
  CHECK(b.block.norm() < 1e-12);
}

TEST_CASE("one layer with exact inverses available equals the exact update under a point channel") {
  // single receive antenna: the reciprocal-diagonal inverse is exact, the
  // channel is deterministic, every subcarrier is a node and the solve is
  // dense, so the layer must reproduce the exact half-step.
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    SystemDims dims = SystemDims::make(8, 1, 3, 12, 6, 1.0, 0.05 + 0.02 * double(inst));
    dims.weights = {1.0, 1.6, 0.7};
    dims.validate();
    const auto stats = dense_stats(dims, 900 + inst, 0.0);
    const PrecoderSet x_prev = random_beam_precoders(dims, 70 + inst);
    const auto sampled = all_nodes(12);
    const CompensationSet comp = CompensationSet::zeros(3, int(sampled.size()), 1);
    DuOptions opts;
    opts.dense_inverse = true;
    const PrecoderSet x_next = du_layer({stats, x_prev, comp, sampled}, dims, opts);

    // reference: exact BCD half-step on the antenna-domain point channel
    swmmse::GridMats h(3);
    for (int k = 0; k < 3; ++k)
      for (int f = 0; f < 12; ++f)
        h[size_t(k)].push_back(channel::to_antenna_domain(stats.mean[size_t(k)][size_t(f)]));
    const PrecoderSet v_prev = channel::precoders_to_antenna(x_prev);
    const auto u = swmmse::update_u(h, v_prev, dims);
    const auto w = swmmse::update_w(h, v_prev, u, dims);
    const PrecoderSet v_next = swmmse::update_v({h}, {u}, {w}, dims);
    const PrecoderSet x_ref = channel::precoders_to_beam(v_next);

    double num = 0.0, den = 0.0;
    for (int k = 0; k < 3; ++k) {
      num += (x_next.mats[size_t(k)] - x_ref.mats[size_t(k)]).squaredNorm();
      den += x_ref.mats[size_t(k)].squaredNorm();
    }
    CHECK(std::sqrt(num / den) < 1e-8);
  }
}

TEST_CASE("zero previous iterate degenerates to a zero update with the flag set") {
  SystemDims dims = SystemDims::make(8, 2, 2, 12, 6, 1.0, 0.1);
  const auto stats = dense_stats(dims, 5, 0.4);
  PrecoderSet x0 = random_beam_precoders(dims, 3);
  for (auto& m : x0.mats) m.setZero();
  x0.update_power();
  const auto sampled = accel::uniform_nodes(12, 4);
  const CompensationSet comp = CompensationSet::zeros(2, int(sampled.size()), 2);
  LayerDiagnostics diag;
  const PrecoderSet x = du_layer({stats, x0, comp, sampled}, dims, DuOptions{}, &diag);
  CHECK(x.power == 0.0);
  CHECK(diag.degenerate_users == 2);
}

TEST_CASE("ideal averaged-inverse compensation beats the uncompensated gram term") {
  Rng rng(55);
  const int m_r = 2, m_t = 8;
  SystemDims dims = SystemDims::make(m_t, m_r, 2, 12, 6, 1.0, 0.2);
  const cmat mean = random_cmat(m_r, m_t, rng);
  const rmat var = random_var(m_r, m_t, rng, 0.6);
  std::vector<cmat> xs;
  double p_tot = 0.0;
  for (int m = 0; m < 2; ++m) {
    xs.push_back(std::sqrt(0.25 / double(m_t)) * random_cmat(m_t, m_r, rng));
    p_tot += xs.back().squaredNorm();
  }
  const double noise = dims.noise_vars[0] / dims.p_max * p_tot;

  const auto mc_mean_cinv = [&](std::uint64_t seed, int n) {
    Rng draws(seed);
    cmat acc = cmat::Zero(m_r, m_r);
    for (int t = 0; t < n; ++t) {
      const cmat h = draw(mean, var, draws);
      cmat a = noise * cmat::Identity(m_r, m_r);
      for (const auto& xm : xs) a += (h * xm) * (h * xm).adjoint();
      const cmat d = (h * xs[0]) * (h * xs[0]).adjoint();
      acc += (a - d).inverse();
    }
    return cmat(acc / double(n));
  };

  cmat e_c = noise * cmat::Identity(m_r, m_r);
  for (const auto& xm : xs) e_c += expected_outer_lowrank(mean, var, xm);
  e_c -= expected_outer_lowrank(mean, var, xs[0]);
  const cmat c_inv = taylor_diag_inverse(0.5 * (e_c + e_c.adjoint().eval()), cmat::Zero(m_r, m_r));

  const cmat o_e = mc_mean_cinv(100, 4000) - c_inv;
  const cmat ref = mc_mean_cinv(200, 40000);
  const cmat truth_m = 0.5 * (ref + ref.adjoint().eval());
  const cmat truth = expected_gram(mean, var, truth_m) * xs[0];
  const cmat base = expected_gram(mean, var, c_inv) * xs[0];
  const cmat comp =
      expected_gram(mean, var, 0.5 * ((c_inv + o_e) + (c_inv + o_e).adjoint().eval())) * xs[0];
  const double err_base = (base - truth).norm();
  const double err_comp = (comp - truth).norm();
  CHECK(err_comp < 0.5 * err_base);
}

TEST_CASE("five uncompensated layers track five exact iterations on deterministic channels") {
  SystemDims dims = SystemDims::make(8, 1, 3, 12, 6, 1.0, 0.1);
  const auto stats = dense_stats(dims, 1234, 0.0);
  const PrecoderSet x0 = channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
  const auto sampled = all_nodes(12);
  DuOptions opts;
  opts.dense_inverse = true;
  const auto comps = zero_compensation(5, 3, int(sampled.size()), 1);
  const PrecoderSet x_du = run_du_network(stats, dims, x0, comps, sampled, opts);

  swmmse::SolveOptions sopts;
  sopts.iters = 5;
  sopts.point_estimate = true;
  const auto res = swmmse::swmmse_solve(stats, dims, sopts, Rng(1));
  const PrecoderSet x_sw = channel::precoders_to_beam(res.v);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 3; ++k) {
    num += (x_du.mats[size_t(k)] - x_sw.mats[size_t(k)]).squaredNorm();
    den += x_sw.mats[size_t(k)].squaredNorm();
  }
  CHECK(std::sqrt(num / den) < 1e-8);
  CHECK(x_du.power == doctest::Approx(dims.p_max).epsilon(1e-9));
}

TEST_CASE("two-antenna approximate layers stay close to the exact solver on easy instances") {
  SystemDims dims = SystemDims::make(8, 2, 2, 12, 6, 1.0, 0.1);
  const auto stats = dense_stats(dims, 777, 0.0);
  const PrecoderSet x0 = channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
  const auto sampled = all_nodes(12);
  DuOptions opts;
  opts.dense_inverse = true;
  const auto comps = zero_compensation(5, 2, int(sampled.size()), 2);
  const PrecoderSet x_du = run_du_network(stats, dims, x0, comps, sampled, opts);

  swmmse::SolveOptions sopts;
  sopts.iters = 5;
  sopts.point_estimate = true;
  const auto res = swmmse::swmmse_solve(stats, dims, sopts, Rng(1));

  const PrecoderSet v_du = channel::precoders_to_antenna(x_du);
  const double ew_du = swmmse::ewsr_eval(stats, v_du, 64, Rng(9), dims);
  const double ew_sw = swmmse::ewsr_eval(stats, res.v, 64, Rng(9), dims);
  CHECK(ew_du > 0.6 * ew_sw);
}

TEST_CASE("structured and dense solve paths agree on beam-sparse scenarios") {
  SystemDims dims = SystemDims::make(16, 2, 3, 24, 6, 1.0, 0.1);
  const auto stats = channel::make_scenario(dims, 4, 88, 3, 0.25);
  const PrecoderSet x0 = channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
  const auto sampled = accel::uniform_nodes(24, 5);
  const CompensationSet comp = CompensationSet::zeros(3, int(sampled.size()), 2);

  DuOptions dense;
  dense.dense_inverse = true;
  LayerDiagnostics dd;
  const PrecoderSet xd = du_layer({stats, x0, comp, sampled}, dims, dense, &dd);

  DuOptions structured;
  structured.energy_keep = 1.0;
  LayerDiagnostics ds;
  const PrecoderSet xs = du_layer({stats, x0, comp, sampled}, dims, structured, &ds);

  double num = 0.0, den = 0.0;
  for (int k = 0; k < 3; ++k) {
    num += (xd.mats[size_t(k)] - xs.mats[size_t(k)]).squaredNorm();
    den += xd.mats[size_t(k)].squaredNorm();
  }
  CHECK(std::sqrt(num / den) < 1e-8);
  CHECK(ds.block_size <= 12);
  CHECK(ds.solve_residual < 1e-8);
}

TEST_CASE("layer output is equivariant under user permutation") {
  SystemDims dims = SystemDims::make(16, 2, 3, 24, 6, 1.0, 0.1);
  dims.weights = {1.0, 1.5, 0.6};
  dims.noise_vars = {0.1, 0.2, 0.05};
  dims.validate();
  auto stats = channel::make_scenario(dims, 4, 99, 3, 0.3);
  const PrecoderSet x0 = random_beam_precoders(dims, 17);
  const auto sampled = accel::uniform_nodes(24, 5);
  const CompensationSet comp = CompensationSet::zeros(3, int(sampled.size()), 2);
  const PrecoderSet base = du_layer({stats, x0, comp, sampled}, dims, DuOptions{});

  const std::vector<int> perm = {2, 0, 1};
  SystemDims pdims = dims;
  channel::ChannelStats pstats = stats;
  PrecoderSet px0 = x0;
  for (int k = 0; k < 3; ++k) {
    const auto src = size_t(perm[size_t(k)]);
    pdims.weights[size_t(k)] = dims.weights[src];
    pdims.noise_vars[size_t(k)] = dims.noise_vars[src];
    pstats.mean[size_t(k)] = stats.mean[src];
    pstats.var[size_t(k)] = stats.var[src];
    pstats.omega[size_t(k)] = stats.omega[src];
    for (size_t b = 0; b < stats.aging.size(); ++b)
      pstats.aging[b].row(k) = stats.aging[b].row(int(src));
    px0.mats[size_t(k)] = x0.mats[src];
  }
  px0.update_power();
  const PrecoderSet pout = du_layer({pstats, px0, comp, sampled}, pdims, DuOptions{});
  for (int k = 0; k < 3; ++k) {
    const auto src = size_t(perm[size_t(k)]);
    const double rel = (pout.mats[size_t(k)] - base.mats[src]).norm() /
                       std::max(1e-30, base.mats[src].norm());
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("layer output is invariant under subcarrier reversal when every subcarrier is a node") {
  SystemDims dims = SystemDims::make(8, 2, 2, 12, 6, 1.0, 0.1);
  auto stats = dense_stats(dims, 654, 0.5);
  const PrecoderSet x0 = random_beam_precoders(dims, 21);
  const auto sampled = all_nodes(12);
  const CompensationSet comp = CompensationSet::zeros(2, int(sampled.size()), 2);
  DuOptions opts;
  opts.dense_inverse = true;
  const PrecoderSet base = du_layer({stats, x0, comp, sampled}, dims, opts);

  channel::ChannelStats rstats = stats;
  for (int k = 0; k < 2; ++k)
    for (int f = 0; f < 12; ++f) {
      rstats.mean[size_t(k)][size_t(f)] = stats.mean[size_t(k)][size_t(11 - f)];
      rstats.var[size_t(k)][size_t(f)] = stats.var[size_t(k)][size_t(11 - f)];
      rstats.omega[size_t(k)][size_t(f)] = stats.omega[size_t(k)][size_t(11 - f)];
    }
  const PrecoderSet rout = du_layer({rstats, x0, comp, sampled}, dims, opts);
  for (int k = 0; k < 2; ++k)
    CHECK((rout.mats[size_t(k)] - base.mats[size_t(k)]).norm() < 1e-10);
}

TEST_CASE("du_layer validates its inputs") {
  SystemDims dims = SystemDims::make(8, 2, 2, 12, 6, 1.0, 0.1);
  const auto stats = dense_stats(dims, 2, 0.2);
  const PrecoderSet x0 = random_beam_precoders(dims, 2);
  const auto good = accel::uniform_nodes(12, 4);
  CompensationSet comp = CompensationSet::zeros(2, int(good.size()), 2);

  std::vector<int> no_end = {0, 4, 8};
  CHECK_THROWS(du_layer({stats, x0, comp, no_end}, dims, DuOptions{}));
  std::vector<int> two = {0, 11};
  CHECK_THROWS(du_layer({stats, x0, comp, two}, dims, DuOptions{}));

  CompensationSet badz = comp;
  badz.z_a[0][1](0, 1) = cplx(0.5, 0.5);  // breaks Hermitian symmetry
  CHECK_THROWS(du_layer({stats, x0, badz, good}, dims, DuOptions{}));

  CompensationSet badshape = comp;
  badshape.o_f[1][0] = cmat::Zero(3, 3);
  CHECK_THROWS(du_layer({stats, x0, badshape, good}, dims, DuOptions{}));

  PrecoderSet ant = channel::precoders_to_antenna(x0);
  CHECK_THROWS(du_layer({stats, ant, comp, good}, dims, DuOptions{}));
}

TEST_CASE("du_layer is deterministic") {
  SystemDims dims = SystemDims::make(16, 2, 3, 24, 6, 1.0, 0.1);
  const auto stats = channel::make_scenario(dims, 4, 13, 3, 0.2);
  const PrecoderSet x0 = random_beam_precoders(dims, 4);
  const auto sampled = accel::uniform_nodes(24, 5);
  const CompensationSet comp = CompensationSet::zeros(3, int(sampled.size()), 2);
  const PrecoderSet a = du_layer({stats, x0, comp, sampled}, dims, DuOptions{});
  const PrecoderSet b = du_layer({stats, x0, comp, sampled}, dims, DuOptions{});
  for (int k = 0; k < 3; ++k) CHECK((a.mats[size_t(k)] - b.mats[size_t(k)]).norm() == 0.0);
}
