// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "rlddu/accel.hpp"
#include "rlddu/channel.hpp"
#include "rlddu/types.hpp"

namespace rlddu::du {

/// Learned additive corrections for one unfolded layer: z_a / z_c adjust the
/// diagonally approximated inverses, o_e / o_f / o_g replace cross-correlation
/// terms the closed-form factorization drops. All matrices are m_r x m_r,
/// indexed [user][sampled-subcarrier-node]. An all-zero set is valid and
/// leaves the layer exactly uncompensated.
struct CompensationSet {
  std::vector<std::vector<cmat>> z_a, z_c, o_e, o_f, o_g;
  int layer_index = 0;

  static CompensationSet zeros(int k_users, int n_nodes, int m_r, int layer_index = 0);
};

/// Inputs of one unfolded layer. `stats` and `x_prev` are beam domain;
/// `sampled` is the ordered subcarrier-node subset (at least three entries,
/// both grid endpoints included).
struct LayerInputs {
  const channel::ChannelStats& stats;
  const PrecoderSet& x_prev;
  const CompensationSet& comp;
  const std::vector<int>& sampled;
};

struct DuOptions {
  bool dense_inverse = false;  ///< exact dense solve, no support pruning
  double energy_keep = 0.99;   ///< beam-support pruning target
  int b_cap = 0;               ///< max beam columns per user (0 = no cap)
  int q_cap = 0;               ///< max block size for the structured solve (0 = no cap)
  double q_threshold = 0.0;    ///< per-index off-diagonal energy filter
};

struct LayerDiagnostics {
  int taylor_floors = 0;      ///< reciprocal-diagonal entries floored
  int degenerate_users = 0;   ///< users with an all-zero numerator
  double solve_residual = 0.0;
  int block_size = 0;         ///< solve block dimension (m_t on the dense path)
};

struct NetDiagnostics {
  std::vector<LayerDiagnostics> layers;
};

/// E[(H^b)^H M H^b] = mean^H M mean + diag_p(sum_r M_rr var_rp), exact under
/// the element-wise independent Gaussian model. `m` must be Hermitian.
cmat expected_gram(const cmat& h_mean, const rmat& var, const cmat& m);

/// E[H^b S (H^b)^H] = mean S mean^H + diag_r(sum_p S_pp var_rp).
cmat expected_outer(const cmat& h_mean, const rmat& var, const cmat& s);

/// expected_outer specialized to S = x x^H without forming S.
cmat expected_outer_lowrank(const cmat& h_mean, const rmat& var, const cmat& x);

/// First-order reciprocal-diagonal inverse 2 E+ - E+ E E+ + z, where E+ holds
/// the reciprocal diagonal of e_mat. Throws std::domain_error on a
/// nonpositive diagonal entry; entries below 1e-12 * trace are floored there
/// and counted through `floored`.
cmat taylor_diag_inverse(const cmat& e_mat, const cmat& z, int* floored = nullptr);

/// Implicit Hermitian m_t x m_t Gram expectation: Diag(d) plus a dense block
/// scattered on a column subset (the block excludes d).
struct GramTerm {
  rvec d;      ///< variance-driven diagonal, full length m_t
  cmat block;  ///< mean-driven part on the owning column subset
};

/// Gram expectation restricted to `cols`: block(p,q) = mean_p^H M mean_q over
/// the subset, d over all columns. Multiply-accumulate counts go to `fc`
/// under "du.expected_gram". Exact whenever mean and var vanish off `cols`.
GramTerm expected_gram_on(const cmat& h_mean, const rmat& var, const cmat& m,
                          const std::vector<int>& cols, accel::FlopCounter* fc = nullptr);

/// Weighted normal-equation operator accumulated over the full subcarrier
/// grid; `block` lives on a shared column subset (excluding `d`).
struct Btilde {
  rvec d;
  cmat block;
};

/// B~ = sum_f sum_m w_m [(sigma_m^2 / p_max) tr(f_hat_mf) I + g_hat_mf],
/// Hermitian-symmetrized. Terms are given at the sampled nodes and
/// quadratically interpolated to every subcarrier; g_hat blocks of all users
/// must share one column subset.
Btilde assemble_btilde(const std::vector<std::vector<cmat>>& f_hat,
                       const std::vector<std::vector<GramTerm>>& g_hat,
                       const std::vector<int>& sampled, const SystemDims& dims);

/// One unfolded update: compensated moment terms at the sampled nodes,
/// interpolation across the grid, then X_k = B~^{-1} w_k sum_f e_hat_kf.
/// No power scaling is applied inside the layer.
PrecoderSet du_layer(const LayerInputs& in, const SystemDims& dims, const DuOptions& opts,
                     LayerDiagnostics* diag = nullptr, accel::FlopCounter* fc = nullptr);

std::vector<CompensationSet> zero_compensation(int n_layers, int k_users, int n_nodes, int m_r);

/// Runs comps.size() layers from `x0` (beam domain) and scales the final
/// iterate to the power budget. A degenerate all-zero output is returned
/// unscaled with its layer flagged.
PrecoderSet run_du_network(const channel::ChannelStats& stats, const SystemDims& dims,
                           const PrecoderSet& x0, const std::vector<CompensationSet>& comps,
                           const std::vector<int>& sampled, const DuOptions& opts,
                           NetDiagnostics* diag = nullptr, accel::FlopCounter* fc = nullptr);

}  // namespace rlddu::du
