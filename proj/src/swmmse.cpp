// SPDX-License-Identifier: Apache-2.0
#include "rlddu/swmmse.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rlddu::swmmse {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double log_det_pd(const cmat& m, bool* ok = nullptr) {
  Eigen::LLT<cmat> llt(m);
  if (llt.info() != Eigen::Success) {
    if (ok) {
      *ok = false;
      return 0.0;
    }
    throw std::runtime_error("log_det_pd: matrix not positive definite");
  }
  if (ok) *ok = true;
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < m.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

cmat herm(const cmat& m) { return 0.5 * (m + m.adjoint()); }

/// Hermitian PD solve with ridge fallback; bumps `count` when the ridge fires.
cmat solve_pd(const cmat& a, const cmat& rhs, long long* count) {
  Eigen::LLT<cmat> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  const double tr = std::abs(a.trace().real());
  const double ridge = 1e-12 * std::max(tr, 1.0);
  if (count) ++(*count);
  cmat ar = a + ridge * cmat::Identity(a.rows(), a.cols());
  Eigen::LLT<cmat> llt2(ar);
  if (llt2.info() == Eigen::Success) return llt2.solve(rhs);
  return ar.completeOrthogonalDecomposition().solve(rhs);
}

double effective_noise(const SystemDims& dims, int k, double total_power) {
  return dims.noise_vars[static_cast<std::size_t>(k)] * total_power / dims.p_max;
}

std::vector<GridMats> draw_antenna_samples(const channel::ChannelStats& stats, const SystemDims& dims,
                                           int n, const Rng& rng) {
  const cmat phi = channel::dft_matrix(dims.m_t);
  std::vector<GridMats> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const auto draw = channel::sample_channel(stats, rng.child(static_cast<std::uint64_t>(s)));
    GridMats h(static_cast<std::size_t>(dims.k_users));
    for (int k = 0; k < dims.k_users; ++k) {
      h[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(dims.n_sub));
      for (int f = 0; f < dims.n_sub; ++f)
        h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] =
            draw.h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] * phi;
    }
    out.push_back(std::move(h));
  }
  return out;
}

GridMats mean_antenna_sample(const channel::ChannelStats& stats, const SystemDims& dims) {
  const cmat phi = channel::dft_matrix(dims.m_t);
  GridMats h(static_cast<std::size_t>(dims.k_users));
  for (int k = 0; k < dims.k_users; ++k) {
    h[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(dims.n_sub));
    for (int f = 0; f < dims.n_sub; ++f)
      h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] =
          stats.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] * phi;
  }
  return h;
}

}  // namespace

rvec rate_per_user(const std::vector<cmat>& h_f, const PrecoderSet& v, const SystemDims& dims,
                   NoiseModel nm) {
  require(v.domain == Domain::Antenna, "rate_per_user: antenna-domain precoders required");
  require(static_cast<int>(h_f.size()) == dims.k_users, "rate_per_user: channel count");
  rvec out(dims.k_users);
  for (int k = 0; k < dims.k_users; ++k) {
    const cmat& h = h_f[static_cast<std::size_t>(k)];
    require(h.rows() == dims.m_r && h.cols() == dims.m_t, "rate_per_user: channel shape");
    const double sig = nm == NoiseModel::Fixed ? dims.noise_vars[static_cast<std::size_t>(k)]
                                               : effective_noise(dims, k, v.power);
    cmat j = sig * cmat::Identity(dims.m_r, dims.m_r);
    cmat sigplus = j;
    for (int m = 0; m < dims.k_users; ++m) {
      const cmat t = h * v.mats[static_cast<std::size_t>(m)];
      const cmat tt = t * t.adjoint();
      sigplus += tt;
      if (m != k) j += tt;
    }
    bool ok_j = false, ok_s = false;
    const double ldj = log_det_pd(herm(j), &ok_j);
    const double lds = log_det_pd(herm(sigplus), &ok_s);
    if (!ok_j || !ok_s) throw std::runtime_error("rate_per_user: singular interference-plus-noise matrix");
    out(k) = (lds - ldj) / std::numbers::ln2;
  }
  return out;
}

GridMats update_u(const GridMats& h, const PrecoderSet& v, const SystemDims& dims, RidgeStats* stats) {
  require(v.domain == Domain::Antenna, "update_u: antenna-domain precoders required");
  GridMats u(static_cast<std::size_t>(dims.k_users));
  long long dummy = 0;
  long long* cnt = stats ? &stats->a_ridge : &dummy;
  for (int k = 0; k < dims.k_users; ++k) {
    u[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(dims.n_sub));
    const double sig = effective_noise(dims, k, v.power);
    for (int f = 0; f < dims.n_sub; ++f) {
      const cmat& hk = h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      cmat a = sig * cmat::Identity(dims.m_r, dims.m_r);
      cmat tk;
      for (int m = 0; m < dims.k_users; ++m) {
        const cmat t = hk * v.mats[static_cast<std::size_t>(m)];
        a += t * t.adjoint();
        if (m == k) tk = t;
      }
      u[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] = solve_pd(herm(a), tk, cnt);
    }
  }
  return u;
}

GridMats update_w(const GridMats& h, const PrecoderSet& v, const GridMats& u, const SystemDims& dims,
                  RidgeStats* stats) {
  GridMats w(static_cast<std::size_t>(dims.k_users));
  for (int k = 0; k < dims.k_users; ++k) {
    w[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(dims.n_sub));
    for (int f = 0; f < dims.n_sub; ++f) {
      const cmat& hk = h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      const cmat& uk = u[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      const cmat e = herm(cmat::Identity(dims.m_r, dims.m_r) -
                          uk.adjoint() * hk * v.mats[static_cast<std::size_t>(k)]);
      Eigen::LLT<cmat> llt(e);
      if (llt.info() != Eigen::Success) {
        if (stats) ++stats->w_singular;
        throw std::runtime_error("update_w: singular MSE matrix");
      }
      w[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] =
          herm(llt.solve(cmat::Identity(dims.m_r, dims.m_r)));
    }
  }
  return w;
}

PrecoderSet update_v(const std::vector<GridMats>& h_samples, const std::vector<GridMats>& u,
                     const std::vector<GridMats>& w, const SystemDims& dims, RidgeStats* stats) {
  require(!h_samples.empty(), "update_v: empty sample list");
  require(h_samples.size() == u.size() && u.size() == w.size(), "update_v: sample count mismatch");
  const int ns = static_cast<int>(h_samples.size());
  const double inv_s = 1.0 / static_cast<double>(ns);

  cmat b = cmat::Zero(dims.m_t, dims.m_t);
  double mu = 0.0;
  std::vector<cmat> num(static_cast<std::size_t>(dims.k_users), cmat::Zero(dims.m_t, dims.m_r));

  for (int s = 0; s < ns; ++s) {
    for (int k = 0; k < dims.k_users; ++k) {
      const double wk = dims.weights[static_cast<std::size_t>(k)];
      const double sk = dims.noise_vars[static_cast<std::size_t>(k)];
      for (int f = 0; f < dims.n_sub; ++f) {
        const cmat& hk = h_samples[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]
                                  [static_cast<std::size_t>(f)];
        const cmat& uk = u[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]
                          [static_cast<std::size_t>(f)];
        const cmat& wm = w[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]
                          [static_cast<std::size_t>(f)];
        const cmat uw = uk * wm;
        const cmat uwu = uw * uk.adjoint();
        const cmat hu = hk.adjoint() * uw;  // m_t x m_r
        num[static_cast<std::size_t>(k)] += (wk * inv_s) * hu;
        b += (wk * inv_s) * (hk.adjoint() * uwu * hk);
        mu += (wk * sk / dims.p_max * inv_s) * uwu.trace().real();
      }
    }
  }
  b = herm(b) + mu * cmat::Identity(dims.m_t, dims.m_t);

  long long dummy = 0;
  long long* cnt = stats ? &stats->b_ridge : &dummy;
  PrecoderSet out;
  out.domain = Domain::Antenna;
  out.mats.reserve(static_cast<std::size_t>(dims.k_users));
  for (int k = 0; k < dims.k_users; ++k)
    out.mats.push_back(solve_pd(b, num[static_cast<std::size_t>(k)], cnt));
  out.update_power();
  return out;
}

PrecoderSet scale_to_power(const PrecoderSet& v, double p_max) {
  require(p_max > 0.0, "scale_to_power: p_max must be positive");
  const double p = v.recompute_power();
  if (!(p > 0.0)) throw std::invalid_argument("scale_to_power: all-zero precoders");
  const double xi = std::sqrt(p_max / p);
  PrecoderSet out = v;
  for (auto& m : out.mats) m *= xi;
  out.power = p_max;
  return out;
}

double sa_objective(const std::vector<GridMats>& h_samples, const std::vector<GridMats>& u,
                    const std::vector<GridMats>& w, const PrecoderSet& v, const SystemDims& dims) {
  require(!h_samples.empty(), "sa_objective: empty sample list");
  const int ns = static_cast<int>(h_samples.size());
  const double inv_s = 1.0 / static_cast<double>(ns);
  double j = 0.0;
  for (int s = 0; s < ns; ++s) {
    for (int k = 0; k < dims.k_users; ++k) {
      const double sig = effective_noise(dims, k, v.power);
      for (int f = 0; f < dims.n_sub; ++f) {
        const cmat& hk = h_samples[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]
                                  [static_cast<std::size_t>(f)];
        const cmat& uk = u[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]
                          [static_cast<std::size_t>(f)];
        const cmat& wm = w[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]
                          [static_cast<std::size_t>(f)];
        cmat cross = cmat::Zero(dims.m_r, dims.m_r);
        cmat tk;
        for (int m = 0; m < dims.k_users; ++m) {
          const cmat t = hk * v.mats[static_cast<std::size_t>(m)];
          if (m == k) {
            tk = t;
          } else {
            const cmat ut = uk.adjoint() * t;
            cross += ut * ut.adjoint();
          }
        }
        const cmat r = cmat::Identity(dims.m_r, dims.m_r) - uk.adjoint() * tk;
        const cmat e = herm(r * r.adjoint() + cross + sig * (uk.adjoint() * uk));
        j += dims.weights[static_cast<std::size_t>(k)] * inv_s *
             ((wm * e).trace().real() - log_det_pd(herm(wm)));
      }
    }
  }
  return j;
}

PrecoderSet initial_precoders(const channel::ChannelStats& stats, const SystemDims& dims) {
  const cmat phi = channel::dft_matrix(dims.m_t);
  const int fc = dims.n_sub / 2;
  PrecoderSet v;
  v.domain = Domain::Antenna;
  const double per_user = dims.p_max / static_cast<double>(dims.k_users);
  for (int k = 0; k < dims.k_users; ++k) {
    cmat m = phi.adjoint() *
             stats.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(fc)].adjoint();
    if (m.norm() < 1e-12) {
      m = cmat::Zero(dims.m_t, dims.m_r);
      for (int c = 0; c < dims.m_r; ++c) m(c % dims.m_t, c) = 1.0;
    }
    m *= std::sqrt(per_user) / m.norm();
    v.mats.push_back(std::move(m));
  }
  v.update_power();
  return v;
}

SolveResult swmmse_solve(const channel::ChannelStats& stats, const SystemDims& dims,
                         const SolveOptions& opts, const Rng& rng) {
  require(opts.iters >= 1, "swmmse_solve: iters must be >= 1");
  require(opts.saa_batch >= 1, "swmmse_solve: saa_batch must be >= 1");

  SolveResult res;
  PrecoderSet v = initial_precoders(stats, dims);

  const cmat w0 = cmat::Identity(dims.m_r, dims.m_r);
  auto blank_grid = [&](const cmat& fill) {
    GridMats g(static_cast<std::size_t>(dims.k_users));
    for (auto& row : g) row.assign(static_cast<std::size_t>(dims.n_sub), fill);
    return g;
  };

  const int ns = opts.point_estimate ? 1 : opts.saa_batch;
  std::vector<GridMats> samples;
  std::vector<GridMats> u(static_cast<std::size_t>(ns), blank_grid(cmat::Zero(dims.m_r, dims.m_r)));
  std::vector<GridMats> w(static_cast<std::size_t>(ns), blank_grid(w0));

  for (int it = 1; it <= opts.iters; ++it) {
    if (opts.point_estimate) {
      if (samples.empty()) samples.push_back(mean_antenna_sample(stats, dims));
    } else if (opts.resample || samples.empty()) {
      const Rng batch_rng = rng.child(static_cast<std::uint64_t>(opts.resample ? it : 1));
      samples = draw_antenna_samples(stats, dims, opts.saa_batch, batch_rng);
    }
    // trace layout: 4 entries per iteration (pre, after-U, after-W, after-V);
    // u/w persist across iterations so the chain is monotone on a fixed batch
    if (opts.trace_objective) res.objective.push_back(sa_objective(samples, u, w, v, dims));

    for (int s = 0; s < ns; ++s)
      u[static_cast<std::size_t>(s)] = update_u(samples[static_cast<std::size_t>(s)], v, dims, &res.ridge);
    if (opts.trace_objective) res.objective.push_back(sa_objective(samples, u, w, v, dims));

    for (int s = 0; s < ns; ++s)
      w[static_cast<std::size_t>(s)] =
          update_w(samples[static_cast<std::size_t>(s)], v, u[static_cast<std::size_t>(s)], dims,
                   &res.ridge);
    if (opts.trace_objective) res.objective.push_back(sa_objective(samples, u, w, v, dims));

    v = update_v(samples, u, w, dims, &res.ridge);
    if (opts.trace_objective) res.objective.push_back(sa_objective(samples, u, w, v, dims));
    res.iters = it;
  }

  res.v = scale_to_power(v, dims.p_max);
  return res;
}

double ewsr_eval(const channel::ChannelStats& stats, const PrecoderSet& v, int n_mc, const Rng& rng,
                 const SystemDims& dims) {
  require(n_mc >= 1, "ewsr_eval: n_mc must be >= 1");
  require(v.domain == Domain::Antenna, "ewsr_eval: antenna-domain precoders required");
  const cmat phi = channel::dft_matrix(dims.m_t);
  double acc = 0.0;
  std::vector<cmat> h_f(static_cast<std::size_t>(dims.k_users));
  for (int s = 0; s < n_mc; ++s) {
    const auto draw = channel::sample_channel(stats, rng.child(static_cast<std::uint64_t>(s)));
    for (int f = 0; f < dims.n_sub; ++f) {
      for (int k = 0; k < dims.k_users; ++k)
        h_f[static_cast<std::size_t>(k)] =
            draw.h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] * phi;
      const rvec r = rate_per_user(h_f, v, dims, NoiseModel::Fixed);
      for (int k = 0; k < dims.k_users; ++k) acc += dims.weights[static_cast<std::size_t>(k)] * r(k);
    }
  }
  return acc / static_cast<double>(n_mc);
}

}  // namespace rlddu::swmmse
