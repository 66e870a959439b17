// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rlddu/rng.hpp"
#include "rlddu/types.hpp"

namespace rlddu::channel {

/// Posterior beam-domain channel statistics for every (user, subcarrier),
/// plus the steady-state element-variance profile and the per-block aging
/// schedule. `var` holds element-wise variances (entries of the channel are
/// treated as independent complex Gaussians).
struct ChannelStats {
  int m_t = 0, m_r = 0, k_users = 0, n_sub = 0;
  int block = 0;                          ///< block index these stats describe
  std::vector<std::vector<cmat>> mean;    ///< [k][f], m_r x m_t
  std::vector<std::vector<rmat>> var;     ///< [k][f], m_r x m_t, >= 0
  std::vector<std::vector<rmat>> omega;   ///< [k][f], m_r x m_t, >= 0
  std::vector<rmat> aging;                ///< per block n=1..n_blocks: (k_users x n_sub), entries in (0,1)

  [[nodiscard]] int n_blocks() const { return static_cast<int>(aging.size()); }
  void check_shapes() const;  ///< throws on inconsistency
};

/// One virtual channel draw: beam-domain realization per (user, subcarrier).
struct ChannelSample {
  std::vector<std::vector<cmat>> h;  ///< [k][f], m_r x m_t
};

/// Unitary normalized DFT matrix of size m (array response).
cmat dft_matrix(int m);

/// H = H^b * Phi (beam -> antenna). Frobenius norm preserving.
cmat to_antenna_domain(const cmat& h_beam);
/// H^b = H * Phi^H (antenna -> beam).
cmat to_beam_domain(const cmat& h_antenna);

/// Domain conversions for precoders: X = Phi * V, V = Phi^H * X.
PrecoderSet precoders_to_beam(const PrecoderSet& p);
PrecoderSet precoders_to_antenna(const PrecoderSet& p);

/// Default aging schedule for block n = 1..n_blocks (single scalar per block).
std::vector<double> default_aging_schedule(int n_blocks);

/// Synthesizes block-0 statistics with per-user sparse beam support
/// (`sparsity_b` columns) and frequency-smooth mean/omega generated from a
/// small number of delay taps. Deterministic given `seed`. Block-0
/// estimation-error variance is var0_scale * omega (default exact CSI).
ChannelStats make_scenario(const SystemDims& dims, int sparsity_b, std::uint64_t seed, int taps = 3,
                           double var0_scale = 0.0);

/// Gauss-Markov aging to block n (1..n_blocks), from block-0 statistics:
///   mean_n = beta * mean_0,  var_n = beta^2 * var_0 + (1 - beta^2) * omega.
ChannelStats evolve_stats(const ChannelStats& stats0, int block_index);

/// Draws one realization: entry = mean + sqrt(var) * CN(0,1). Entries are
/// generated from per-(user, subcarrier) substreams of `stream`, so results
/// do not depend on evaluation order.
ChannelSample sample_channel(const ChannelStats& stats, const Rng& stream);

}  // namespace rlddu::channel
