// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlddu {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rmat = Eigen::MatrixXd;
using rvec = Eigen::VectorXd;

/// System geometry and per-user link constants for one timeslot / one RBG.
struct SystemDims {
  int m_t = 0;       ///< transmit antennas at the BS
  int m_r = 0;       ///< receive antennas per user
  int k_users = 0;   ///< number of users
  int n_sub = 0;     ///< subcarriers in the RBG (multiple of 12)
  int n_blocks = 0;  ///< downlink blocks per timeslot
  double p_max = 0.0;
  std::vector<double> noise_vars;  ///< sigma_k^2 per user
  std::vector<double> weights;     ///< omega_k per user, > 0

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const {
    if (m_t < 1 || m_r < 1 || m_r > m_t) throw std::invalid_argument("dims: need 1 <= m_r <= m_t");
    if (k_users < 1) throw std::invalid_argument("dims: k_users >= 1");
    if (n_sub < 12 || n_sub % 12 != 0) throw std::invalid_argument("dims: n_sub must be a positive multiple of 12");
    if (n_blocks < 1) throw std::invalid_argument("dims: n_blocks >= 1");
    if (!(p_max > 0.0)) throw std::invalid_argument("dims: p_max > 0");
    if (static_cast<int>(noise_vars.size()) != k_users || static_cast<int>(weights.size()) != k_users)
      throw std::invalid_argument("dims: noise_vars/weights must have k_users entries");
    for (double s : noise_vars)
      if (!(s > 0.0)) throw std::invalid_argument("dims: all noise variances > 0");
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("dims: all weights > 0");
  }

  /// Convenience: uniform noise/weights.
  static SystemDims make(int m_t, int m_r, int k_users, int n_sub, int n_blocks, double p_max,
                         double noise_var) {
    SystemDims d;
    d.m_t = m_t;
    d.m_r = m_r;
    d.k_users = k_users;
    d.n_sub = n_sub;
    d.n_blocks = n_blocks;
    d.p_max = p_max;
    d.noise_vars.assign(static_cast<size_t>(k_users), noise_var);
    d.weights.assign(static_cast<size_t>(k_users), 1.0);
    d.validate();
    return d;
  }
};

enum class Domain { Antenna, Beam };

/// Per-user precoder matrices (m_t x m_r) in either domain, with cached
/// total transmit power Sum_k Tr(V_k V_k^H).
struct PrecoderSet {
  Domain domain = Domain::Antenna;
  std::vector<cmat> mats;
  double power = 0.0;

  static PrecoderSet make(Domain dom, std::vector<cmat> m) {
    PrecoderSet p;
    p.domain = dom;
    p.mats = std::move(m);
    p.power = p.recompute_power();
    return p;
  }

  [[nodiscard]] double recompute_power() const {
    double s = 0.0;
    for (const auto& v : mats) s += v.squaredNorm();
    return s;
  }

  void update_power() { power = recompute_power(); }

  [[nodiscard]] int users() const { return static_cast<int>(mats.size()); }
};

}  // namespace rlddu
