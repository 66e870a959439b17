// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "rlddu/channel.hpp"
#include "rlddu/rng.hpp"
#include "rlddu/types.hpp"

namespace rlddu::swmmse {

/// Per-(user, subcarrier) matrices, indexed [k][f].
using GridMats = std::vector<std::vector<cmat>>;

/// Receive filters U and MSE weights W for one channel realization.
struct BcdState {
  GridMats u;  ///< m_r x m_r
  GridMats w;  ///< m_r x m_r, Hermitian PD
  int iteration = 0;
};

/// Counts numerical fallbacks (ridge regularization of near-singular solves).
struct RidgeStats {
  long long a_ridge = 0;       ///< regularized receive-covariance inverses
  long long b_ridge = 0;       ///< regularized precoder-system solves
  long long w_singular = 0;    ///< singular MSE-weight inversions
};

enum class NoiseModel {
  Fixed,        ///< per-user noise variance sigma_k^2 as configured
  PowerScaled,  ///< effective noise (sigma_k^2 / p_max) * total precoder power
};

/// Per-user achievable rates (bits) at one subcarrier for a given realization.
/// `h_f[k]` is user k's antenna-domain channel at this subcarrier.
rvec rate_per_user(const std::vector<cmat>& h_f, const PrecoderSet& v, const SystemDims& dims,
                   NoiseModel nm = NoiseModel::Fixed);

/// U_{k,f} = A^{-1} H V_k with A = sum_m H V_m V_m^H H^H + effective-noise * I.
/// `h[k][f]` is one antenna-domain realization. Near-singular A gets a
/// 1e-12-trace ridge, counted in `stats`.
GridMats update_u(const GridMats& h, const PrecoderSet& v, const SystemDims& dims,
                  RidgeStats* stats = nullptr);

/// W_{k,f} = (I - U^H H V_k)^{-1}, symmetrized Hermitian.
GridMats update_w(const GridMats& h, const PrecoderSet& v, const GridMats& u, const SystemDims& dims,
                  RidgeStats* stats = nullptr);

/// V_k = B^{-1} * omega_k * sum_f avg_s[H^H U W], with
/// B = sum_{f,m} avg_s[omega_m ((sigma_m^2/p_max) Tr(U W U^H) I + H^H U W U^H H)].
/// Sample averages run over the provided realizations (one u/w grid each).
PrecoderSet update_v(const std::vector<GridMats>& h_samples, const std::vector<GridMats>& u,
                     const std::vector<GridMats>& w, const SystemDims& dims,
                     RidgeStats* stats = nullptr);

/// xi-scaling to exact total power p_max; directions unchanged.
PrecoderSet scale_to_power(const PrecoderSet& v, double p_max);

/// Sample-average objective sum_{k,f} omega_k avg_s[Tr(W E~) - ln det W] where
/// E~ is the MSE matrix under the power-scaled effective noise. Natural log.
double sa_objective(const std::vector<GridMats>& h_samples, const std::vector<GridMats>& u,
                    const std::vector<GridMats>& w, const PrecoderSet& v, const SystemDims& dims);

struct SolveOptions {
  int iters = 5;
  int saa_batch = 4;
  bool point_estimate = false;  ///< use the posterior mean as the single sample (classical WMMSE)
  bool resample = true;         ///< fresh SAA batch each iteration
  bool trace_objective = false;
};

struct SolveResult {
  PrecoderSet v;                  ///< antenna domain, power = p_max
  std::vector<double> objective;  ///< if traced: value after every half-step
  RidgeStats ridge;
  int iters = 0;
};

/// Matched-filter start: V_k = Phi^H (mean^b at the central subcarrier)^H,
/// per-user power p_max / K. Falls back to unit first columns for zero means.
PrecoderSet initial_precoders(const channel::ChannelStats& stats, const SystemDims& dims);

/// Block coordinate descent on the sample-average surrogate, then xi-scaling.
SolveResult swmmse_solve(const channel::ChannelStats& stats, const SystemDims& dims,
                         const SolveOptions& opts, const Rng& rng);

/// Monte Carlo expected weighted sum rate (bits, summed over users and
/// subcarriers). Channel draws are keyed by sample index only, so two
/// precoder sets evaluated with the same stream see identical channels.
double ewsr_eval(const channel::ChannelStats& stats, const PrecoderSet& v, int n_mc, const Rng& rng,
                 const SystemDims& dims);

}  // namespace rlddu::swmmse
