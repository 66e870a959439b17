// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rlddu/channel.hpp"
#include "rlddu/swmmse.hpp"

using namespace rlddu;
using namespace rlddu::swmmse;

namespace {

channel::ChannelStats manual_stats(const SystemDims& dims, const cplx& mean_value, double var_value) {
  channel::ChannelStats st;
  st.m_t = dims.m_t;
  st.m_r = dims.m_r;
  st.k_users = dims.k_users;
  st.n_sub = dims.n_sub;
  st.block = 0;
  st.mean.assign((std::size_t)dims.k_users,
                 std::vector<cmat>((std::size_t)dims.n_sub, cmat::Constant(dims.m_r, dims.m_t, mean_value)));
  st.var.assign((std::size_t)dims.k_users,
                std::vector<rmat>((std::size_t)dims.n_sub, rmat::Constant(dims.m_r, dims.m_t, var_value)));
  st.omega.assign((std::size_t)dims.k_users,
                  std::vector<rmat>((std::size_t)dims.n_sub, rmat::Constant(dims.m_r, dims.m_t, 1.0)));
  for (int n = 0; n < dims.n_blocks; ++n) st.aging.push_back(rmat::Constant(dims.k_users, dims.n_sub, 0.9));
  return st;
}

GridMats antenna_grid(const channel::ChannelStats& st, const SystemDims& dims) {
  const cmat phi = channel::dft_matrix(dims.m_t);
  GridMats h((std::size_t)dims.k_users);
  for (int k = 0; k < dims.k_users; ++k) {
    h[(std::size_t)k].resize((std::size_t)dims.n_sub);
    for (int f = 0; f < dims.n_sub; ++f) h[(std::size_t)k][(std::size_t)f] = st.mean[(std::size_t)k][(std::size_t)f] * phi;
  }
  return h;
}

PrecoderSet random_precoders(const SystemDims& dims, std::uint64_t seed, double power) {
  Rng r(seed);
  PrecoderSet v;
  v.domain = Domain::Antenna;
  for (int k = 0; k < dims.k_users; ++k) {
    cmat m(dims.m_t, dims.m_r);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = r.cgauss();
    v.mats.push_back(m);
  }
  v.update_power();
  return scale_to_power(v, power);
}

}  // namespace

TEST_CASE("single-user scalar rate reduces to the Shannon formula") {
  SystemDims dims = SystemDims::make(1, 1, 1, 12, 6, 4.0, 1.0);
  PrecoderSet v;
  v.domain = Domain::Antenna;
  v.mats.push_back(cmat::Constant(1, 1, std::sqrt(dims.p_max)));
  v.update_power();
  std::vector<cmat> h = {cmat::Constant(1, 1, 1.0)};
  const rvec r = rate_per_user(h, v, dims, NoiseModel::Fixed);
  CHECK(r(0) == doctest::Approx(std::log2(1.0 + dims.p_max)).epsilon(1e-12));
  // at full power the power-scaled surrogate equals the fixed-noise rate
  const rvec rt = rate_per_user(h, v, dims, NoiseModel::PowerScaled);
  CHECK(rt(0) == doctest::Approx(r(0)).epsilon(1e-12));
}

TEST_CASE("zero precoders give zero rate") {
  SystemDims dims = SystemDims::make(4, 2, 2, 12, 6, 1.0, 0.5);
  PrecoderSet v;
  v.domain = Domain::Antenna;
  for (int k = 0; k < dims.k_users; ++k) v.mats.push_back(cmat::Zero(dims.m_t, dims.m_r));
  v.update_power();
  Rng r(3);
  std::vector<cmat> h;
  for (int k = 0; k < dims.k_users; ++k) {
    cmat m(dims.m_r, dims.m_t);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = r.cgauss();
    h.push_back(m);
  }
  const rvec rates = rate_per_user(h, v, dims, NoiseModel::Fixed);
  for (int k = 0; k < dims.k_users; ++k) CHECK(rates(k) == 0.0);
}

TEST_CASE("surrogate rate equals fixed-noise rate at full power on a random instance") {
  SystemDims dims = SystemDims::make(4, 2, 2, 12, 6, 2.0, 0.3);
  const PrecoderSet v = random_precoders(dims, 7, dims.p_max);
  Rng r(7);
  std::vector<cmat> h;
  for (int k = 0; k < dims.k_users; ++k) {
    cmat m(dims.m_r, dims.m_t);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = r.cgauss();
    h.push_back(m);
  }
  const rvec a = rate_per_user(h, v, dims, NoiseModel::Fixed);
  const rvec b = rate_per_user(h, v, dims, NoiseModel::PowerScaled);
  CHECK((a - b).norm() < 1e-10);
}

TEST_CASE("scalar receive-filter update matches the hand-solved value") {
  SystemDims dims = SystemDims::make(1, 1, 1, 12, 6, 1.0, 1.0);  // sigma^2 = p_max
  PrecoderSet v;
  v.domain = Domain::Antenna;
  v.mats.push_back(cmat::Constant(1, 1, 1.0));
  v.update_power();
  GridMats h(1, std::vector<cmat>((std::size_t)dims.n_sub, cmat::Constant(1, 1, 1.0)));
  const GridMats u = update_u(h, v, dims);
  CHECK(u[0][0](0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u[0][0](0, 0).imag() == doctest::Approx(0.0));
  const GridMats w = update_w(h, v, u, dims);
  CHECK(w[0][0](0, 0).real() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("all-zero precoders make the receive covariance degenerate and flag the ridge") {
  SystemDims dims = SystemDims::make(2, 1, 1, 12, 6, 1.0, 0.5);
  PrecoderSet v;
  v.domain = Domain::Antenna;
  v.mats.push_back(cmat::Zero(dims.m_t, dims.m_r));
  v.update_power();
  GridMats h(1, std::vector<cmat>((std::size_t)dims.n_sub, cmat::Constant(1, 2, 1.0)));
  RidgeStats rs;
  const GridMats u = update_u(h, v, dims, &rs);
  CHECK(rs.a_ridge > 0);
  CHECK(u[0][0].norm() == 0.0);  // zero rhs regardless of regularization
}

TEST_CASE("zero own precoder yields identity MSE weight") {
  SystemDims dims = SystemDims::make(4, 2, 2, 12, 6, 1.0, 0.5);
  PrecoderSet v = random_precoders(dims, 11, dims.p_max);
  v.mats[0].setZero();
  v.update_power();
  const auto st = manual_stats(dims, cplx(0.4, -0.2), 0.0);
  const GridMats h = antenna_grid(st, dims);
  const GridMats u = update_u(h, v, dims);
  const GridMats w = update_w(h, v, u, dims);
  CHECK((w[0][5] - cmat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("closed-form receive filter is a stationary point of the surrogate objective") {
  SystemDims dims = SystemDims::make(4, 2, 2, 12, 6, 1.5, 0.4);
  const auto stats = channel::make_scenario(dims, 3, 21);
  const PrecoderSet v = random_precoders(dims, 5, dims.p_max);
  std::vector<GridMats> h = {antenna_grid(channel::evolve_stats(stats, 0), dims)};
  // use the posterior mean as the single deterministic sample
  h[0] = antenna_grid(stats, dims);
  std::vector<GridMats> u = {update_u(h[0], v, dims)};
  std::vector<GridMats> w = {update_w(h[0], v, u[0], dims)};

  auto fd_grad_norm_u = [&](const GridMats& base) {
    const double eps = 1e-5;
    double norm2 = 0.0;
    for (int re = 0; re < 2; ++re) {
      for (int i = 0; i < dims.m_r; ++i)
        for (int j = 0; j < dims.m_r; ++j) {
          auto up = base, dn = base;
          const cplx d = re ? cplx(0, eps) : cplx(eps, 0);
          up[0][4](i, j) += d;
          dn[0][4](i, j) -= d;
          const double g = (sa_objective(h, {up}, w, v, dims) - sa_objective(h, {dn}, w, v, dims)) / (2 * eps);
          norm2 += g * g;
        }
    }
    return std::sqrt(norm2);
  };
  const double g_opt = fd_grad_norm_u(u[0]);
  GridMats off = u[0];
  off[0][4] += cmat::Constant(dims.m_r, dims.m_r, cplx(0.05, -0.03));
  const double g_off = fd_grad_norm_u(off);
  CHECK(g_opt <= 1e-4 * (g_off + 1.0));
}

TEST_CASE("closed-form MSE weight is a stationary point of the surrogate objective") {
  SystemDims dims = SystemDims::make(4, 2, 2, 12, 6, 1.5, 0.4);
  const auto stats = channel::make_scenario(dims, 3, 33);
  const PrecoderSet v = random_precoders(dims, 6, dims.p_max);
  std::vector<GridMats> h = {antenna_grid(stats, dims)};
  std::vector<GridMats> u = {update_u(h[0], v, dims)};
  std::vector<GridMats> w = {update_w(h[0], v, u[0], dims)};

  // perturb along Hermitian directions only, so W stays in the feasible cone
  auto fd_grad_norm_w = [&](const GridMats& base) {
    const double eps = 1e-6;
    double norm2 = 0.0;
    std::vector<cmat> dirs;
    for (int i = 0; i < dims.m_r; ++i) {
      cmat d = cmat::Zero(dims.m_r, dims.m_r);
      d(i, i) = 1.0;
      dirs.push_back(d);
    }
    for (int i = 0; i < dims.m_r; ++i)
      for (int j = i + 1; j < dims.m_r; ++j) {
        cmat d = cmat::Zero(dims.m_r, dims.m_r);
        d(i, j) = d(j, i) = 1.0;
        dirs.push_back(d);
        d(i, j) = cplx(0, 1);
        d(j, i) = cplx(0, -1);
        dirs.push_back(d);
      }
    for (const auto& d : dirs) {
      auto up = base, dn = base;
      up[1][2] += eps * d;
      dn[1][2] -= eps * d;
      const double g = (sa_objective(h, u, {up}, v, dims) - sa_objective(h, u, {dn}, v, dims)) / (2 * eps);
      norm2 += g * g;
    }
    return std::sqrt(norm2);
  };
  const double g_opt = fd_grad_norm_w(w[0]);
  GridMats off = w[0];
  off[1][2] += 0.1 * cmat::Identity(dims.m_r, dims.m_r);
  const double g_off = fd_grad_norm_w(off);
  CHECK(g_opt <= 1e-4 * (g_off + 1.0));
}

TEST_CASE("precoder update is idempotent in duplicated samples") {
  SystemDims dims = SystemDims::make(4, 2, 3, 12, 6, 1.0, 0.2);
  const auto stats = channel::make_scenario(dims, 3, 44);
  const PrecoderSet v = random_precoders(dims, 9, dims.p_max);
  const GridMats h = antenna_grid(stats, dims);
  const GridMats u = update_u(h, v, dims);
  const GridMats w = update_w(h, v, u, dims);
  const PrecoderSet one = update_v({h}, {u}, {w}, dims);
  const PrecoderSet two = update_v({h, h}, {u, u}, {w, w}, dims);
  for (int k = 0; k < dims.k_users; ++k) CHECK((one.mats[(std::size_t)k] - two.mats[(std::size_t)k]).norm() < 1e-10);
}

TEST_CASE("scale_to_power hits the budget exactly, preserves directions, and is idempotent") {
  SystemDims dims = SystemDims::make(4, 2, 3, 12, 6, 1.0, 0.2);
  PrecoderSet v = random_precoders(dims, 13, 4.0);
  CHECK(v.power == doctest::Approx(4.0));
  const PrecoderSet s = scale_to_power(v, 1.0);
  CHECK(s.recompute_power() == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k < dims.k_users; ++k) {
    const cmat a = v.mats[(std::size_t)k] / v.mats[(std::size_t)k].norm();
    const cmat b = s.mats[(std::size_t)k] / s.mats[(std::size_t)k].norm();
    CHECK((a - b).norm() < 1e-12);
  }
  const PrecoderSet s2 = scale_to_power(s, 1.0);
  for (int k = 0; k < dims.k_users; ++k) CHECK((s2.mats[(std::size_t)k] - s.mats[(std::size_t)k]).norm() < 1e-14);
  CHECK_THROWS(scale_to_power(PrecoderSet{Domain::Antenna, {cmat::Zero(4, 2)}, 0.0}, 1.0));

  PrecoderSet half = random_precoders(dims, 14, 4.0);
  const PrecoderSet q = scale_to_power(half, 1.0);
  CHECK((q.mats[0] - 0.5 * half.mats[0]).norm() < 1e-12);
}

TEST_CASE("scalar perfect-CSI pipeline lands on the analytic fixed point") {
  SystemDims dims = SystemDims::make(1, 1, 1, 12, 6, 2.5, 1e-4);
  auto st = manual_stats(dims, cplx(1.0, 0.0), 0.0);
  SolveOptions opts;
  opts.iters = 6;
  opts.point_estimate = true;
  const SolveResult res = swmmse_solve(st, dims, opts, Rng(1));
  CHECK(std::abs(res.v.mats[0](0, 0)) == doctest::Approx(std::sqrt(dims.p_max)).epsilon(1e-6));
  CHECK(res.v.recompute_power() == doctest::Approx(dims.p_max).epsilon(1e-10));
}

TEST_CASE("deterministic solver objective is non-increasing at every half-step") {
  SystemDims dims = SystemDims::make(8, 2, 3, 12, 6, 1.0, 0.1);
  for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
    const auto stats = channel::make_scenario(dims, 3, seed);
    SolveOptions opts;
    opts.iters = 6;
    opts.point_estimate = true;
    opts.trace_objective = true;
    const SolveResult res = swmmse_solve(stats, dims, opts, Rng(seed));
    REQUIRE(res.objective.size() == 4u * 6u);
    const double tol = 1e-9 * std::max(1.0, std::abs(res.objective.front()));
    for (std::size_t i = 1; i < res.objective.size(); ++i) CHECK(res.objective[i] <= res.objective[i - 1] + tol);
    CHECK(res.v.recompute_power() == doctest::Approx(dims.p_max).epsilon(1e-9));
  }
}

TEST_CASE("SAA solver with a frozen batch is monotone within iterations") {
  SystemDims dims = SystemDims::make(8, 2, 3, 12, 6, 1.0, 0.1);
  const auto stats = channel::evolve_stats(channel::make_scenario(dims, 3, 77), 4);
  SolveOptions opts;
  opts.iters = 5;
  opts.saa_batch = 3;
  opts.resample = false;
  opts.trace_objective = true;
  const SolveResult res = swmmse_solve(stats, dims, opts, Rng(8));
  REQUIRE(res.objective.size() == 4u * 5u);
  const double tol = 1e-9 * std::max(1.0, std::abs(res.objective.front()));
  for (std::size_t i = 1; i < res.objective.size(); ++i) CHECK(res.objective[i] <= res.objective[i - 1] + tol);
}

TEST_CASE("weighted instances stay monotone with nonuniform user weights") {
  SystemDims dims = SystemDims::make(8, 2, 3, 12, 6, 1.0, 0.1);
  dims.weights = {2.0, 0.5, 1.25};
  const auto stats = channel::make_scenario(dims, 3, 55);
  SolveOptions opts;
  opts.iters = 5;
  opts.point_estimate = true;
  opts.trace_objective = true;
  const SolveResult res = swmmse_solve(stats, dims, opts, Rng(2));
  const double tol = 1e-9 * std::max(1.0, std::abs(res.objective.front()));
  for (std::size_t i = 1; i < res.objective.size(); ++i) CHECK(res.objective[i] <= res.objective[i - 1] + tol);
}

TEST_CASE("ewsr_eval equals the deterministic weighted sum rate when var is zero") {
  SystemDims dims = SystemDims::make(8, 2, 2, 12, 6, 1.0, 0.1);
  dims.weights = {1.5, 0.75};
  const auto stats = channel::make_scenario(dims, 3, 91);
  const PrecoderSet v = random_precoders(dims, 17, dims.p_max);
  const double a = ewsr_eval(stats, v, 1, Rng(4), dims);
  const double b = ewsr_eval(stats, v, 5, Rng(999), dims);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
  const GridMats h = antenna_grid(stats, dims);
  double direct = 0.0;
  for (int f = 0; f < dims.n_sub; ++f) {
    std::vector<cmat> hf;
    for (int k = 0; k < dims.k_users; ++k) hf.push_back(h[(std::size_t)k][(std::size_t)f]);
    const rvec r = rate_per_user(hf, v, dims, NoiseModel::Fixed);
    for (int k = 0; k < dims.k_users; ++k) direct += dims.weights[(std::size_t)k] * r(k);
  }
  CHECK(a == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("ewsr_eval is bit-reproducible under common random numbers") {
  SystemDims dims = SystemDims::make(8, 2, 2, 12, 6, 1.0, 0.1);
  const auto stats = channel::evolve_stats(channel::make_scenario(dims, 3, 10), 3);
  const PrecoderSet v = random_precoders(dims, 23, dims.p_max);
  const double a = ewsr_eval(stats, v, 64, Rng(1234), dims);
  const double b = ewsr_eval(stats, v, 64, Rng(1234), dims);
  CHECK(a == b);
  CHECK(ewsr_eval(stats, v, 64, Rng(1235), dims) != a);
}

TEST_CASE("Monte Carlo EWSR converges as the sample count grows") {
  SystemDims dims = SystemDims::make(8, 2, 1, 12, 6, 1.0, 0.1);
  const auto stats = channel::evolve_stats(channel::make_scenario(dims, 3, 31), 4);
  const PrecoderSet v = random_precoders(dims, 29, dims.p_max);
  const int n_small = 400;
  // standard error from per-sample spread
  double m1 = 0.0, m2 = 0.0;
  for (int s = 0; s < n_small; ++s) {
    const double r = ewsr_eval(stats, v, 1, Rng(777).child((std::uint64_t)s), dims);
    m1 += r;
    m2 += r * r;
  }
  m1 /= n_small;
  m2 = m2 / n_small - m1 * m1;
  const double se = std::sqrt(std::max(m2, 0.0) / n_small);
  const double big = ewsr_eval(stats, v, 4000, Rng(778), dims);
  CHECK(std::abs(m1 - big) <= 3.5 * se + 1e-9);
}

TEST_CASE("solver rejects invalid option combinations") {
  SystemDims dims = SystemDims::make(4, 2, 2, 12, 6, 1.0, 0.1);
  const auto stats = channel::make_scenario(dims, 2, 1);
  SolveOptions opts;
  opts.iters = 0;
  CHECK_THROWS(swmmse_solve(stats, dims, opts, Rng(0)));
  opts.iters = 1;
  opts.saa_batch = 0;
  CHECK_THROWS(swmmse_solve(stats, dims, opts, Rng(0)));
  opts.saa_batch = 1;
  const SolveResult res = swmmse_solve(stats, dims, opts, Rng(0));
  CHECK(res.v.recompute_power() == doctest::Approx(dims.p_max).epsilon(1e-9));
}
