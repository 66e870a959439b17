// SPDX-License-Identifier: Apache-2.0
#include "rlddu/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rlddu::channel {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void ChannelStats::check_shapes() const {
  require(m_t > 0 && m_r > 0 && k_users > 0 && n_sub > 0, "ChannelStats: bad dims");
  require(static_cast<int>(mean.size()) == k_users, "ChannelStats: mean user count");
  require(static_cast<int>(var.size()) == k_users, "ChannelStats: var user count");
  require(static_cast<int>(omega.size()) == k_users, "ChannelStats: omega user count");
  for (int k = 0; k < k_users; ++k) {
    require(static_cast<int>(mean[k].size()) == n_sub, "ChannelStats: mean subcarrier count");
    require(static_cast<int>(var[k].size()) == n_sub, "ChannelStats: var subcarrier count");
    require(static_cast<int>(omega[k].size()) == n_sub, "ChannelStats: omega subcarrier count");
    for (int f = 0; f < n_sub; ++f) {
      require(mean[k][f].rows() == m_r && mean[k][f].cols() == m_t, "ChannelStats: mean shape");
      require(var[k][f].rows() == m_r && var[k][f].cols() == m_t, "ChannelStats: var shape");
      require(omega[k][f].rows() == m_r && omega[k][f].cols() == m_t, "ChannelStats: omega shape");
      require(var[k][f].minCoeff() >= 0.0, "ChannelStats: negative variance");
      require(omega[k][f].minCoeff() >= 0.0, "ChannelStats: negative omega");
    }
  }
  for (const auto& a : aging) {
    require(a.rows() == k_users && a.cols() == n_sub, "ChannelStats: aging shape");
    require(a.minCoeff() > 0.0 && a.maxCoeff() <= 1.0, "ChannelStats: aging out of range");
  }
}

cmat dft_matrix(int m) {
  require(m > 0, "dft_matrix: m must be positive");
  cmat phi(m, m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(p) * static_cast<double>(q) /
                         static_cast<double>(m);
      phi(p, q) = scale * cplx(std::cos(ang), std::sin(ang));
    }
  }
  return phi;
}

cmat to_antenna_domain(const cmat& h_beam) { return h_beam * dft_matrix(static_cast<int>(h_beam.cols())); }

cmat to_beam_domain(const cmat& h_antenna) {
  return h_antenna * dft_matrix(static_cast<int>(h_antenna.cols())).adjoint();
}

PrecoderSet precoders_to_beam(const PrecoderSet& p) {
  require(p.domain == Domain::Antenna, "precoders_to_beam: expected antenna-domain input");
  PrecoderSet out = p;
  out.domain = Domain::Beam;
  if (p.mats.empty()) return out;
  const cmat phi = dft_matrix(static_cast<int>(p.mats[0].rows()));
  for (auto& m : out.mats) m = phi * m;
  out.update_power();
  return out;
}

PrecoderSet precoders_to_antenna(const PrecoderSet& p) {
  require(p.domain == Domain::Beam, "precoders_to_antenna: expected beam-domain input");
  PrecoderSet out = p;
  out.domain = Domain::Antenna;
  if (p.mats.empty()) return out;
  const cmat phi = dft_matrix(static_cast<int>(p.mats[0].rows()));
  for (auto& m : out.mats) m = phi.adjoint() * m;
  out.update_power();
  return out;
}

std::vector<double> default_aging_schedule(int n_blocks) {
  require(n_blocks >= 0, "default_aging_schedule: negative block count");
  static const std::vector<double> base = {0.96, 0.92, 0.84, 0.75, 0.63, 0.49};
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_blocks));
  for (int n = 0; n < n_blocks; ++n) {
    if (n < static_cast<int>(base.size())) {
      out.push_back(base[static_cast<std::size_t>(n)]);
    } else {
      // extend geometrically with the last observed decay ratio
      out.push_back(out.back() * (base.back() / base[base.size() - 2]));
    }
  }
  return out;
}

ChannelStats make_scenario(const SystemDims& dims, int sparsity_b, std::uint64_t seed, int taps,
                           double var0_scale) {
  dims.validate();
  require(sparsity_b >= 1 && sparsity_b <= dims.m_t, "make_scenario: sparsity_b out of range");
  require(taps >= 1, "make_scenario: taps must be positive");
  require(var0_scale >= 0.0 && var0_scale < 1.0, "make_scenario: var0_scale out of [0,1)");

  ChannelStats st;
  st.m_t = dims.m_t;
  st.m_r = dims.m_r;
  st.k_users = dims.k_users;
  st.n_sub = dims.n_sub;
  st.block = 0;
  st.mean.assign(static_cast<std::size_t>(dims.k_users), {});
  st.var.assign(static_cast<std::size_t>(dims.k_users), {});
  st.omega.assign(static_cast<std::size_t>(dims.k_users), {});

  // exponential delay power profile, unit sum
  std::vector<double> tap_pow(static_cast<std::size_t>(taps));
  double tp_sum = 0.0;
  for (int t = 0; t < taps; ++t) {
    tap_pow[static_cast<std::size_t>(t)] = std::exp(-static_cast<double>(t));
    tp_sum += tap_pow[static_cast<std::size_t>(t)];
  }
  for (auto& p : tap_pow) p /= tp_sum;

  const Rng root(seed);
  const double target = static_cast<double>(dims.m_r) * static_cast<double>(dims.m_t);

  for (int k = 0; k < dims.k_users; ++k) {
    const Rng uk = root.child(static_cast<std::uint64_t>(k));

    // beam support: sparsity_b distinct columns via partial Fisher-Yates
    Rng sup = uk.child(0);
    std::vector<int> perm(static_cast<std::size_t>(dims.m_t));
    for (int q = 0; q < dims.m_t; ++q) perm[static_cast<std::size_t>(q)] = q;
    for (int i = 0; i < sparsity_b; ++i) {
      const int j = i + static_cast<int>(sup.uniform_int(static_cast<std::uint64_t>(dims.m_t - i)));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<int> support(perm.begin(), perm.begin() + sparsity_b);
    std::sort(support.begin(), support.end());

    // per-column power shares on the support
    Rng colp = uk.child(1);
    std::vector<double> wq(static_cast<std::size_t>(sparsity_b));
    double wsum = 0.0;
    for (auto& w : wq) {
      w = 0.25 + colp.uniform();
      wsum += w;
    }
    for (auto& w : wq) w /= wsum;

    // tap gains g[t](r, i) for supported column i
    Rng gaps = uk.child(2);
    std::vector<cmat> gains(static_cast<std::size_t>(taps));
    for (int t = 0; t < taps; ++t) {
      cmat g(dims.m_r, sparsity_b);
      for (int r = 0; r < dims.m_r; ++r)
        for (int i = 0; i < sparsity_b; ++i)
          g(r, i) = gaps.cgauss() * std::sqrt(tap_pow[static_cast<std::size_t>(t)] *
                                              wq[static_cast<std::size_t>(i)]);
      gains[static_cast<std::size_t>(t)] = std::move(g);
    }

    // frequency-smooth mean from the taps; exact zeros off support
    st.mean[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(dims.n_sub),
                                                cmat::Zero(dims.m_r, dims.m_t));
    double raw_energy = 0.0;
    for (int f = 0; f < dims.n_sub; ++f) {
      cmat& m = st.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      for (int t = 0; t < taps; ++t) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(t) * static_cast<double>(f) /
                           (4.0 * static_cast<double>(dims.n_sub));
        const cplx rot(std::cos(ang), std::sin(ang));
        for (int i = 0; i < sparsity_b; ++i) {
          const int q = support[static_cast<std::size_t>(i)];
          m.col(q) += rot * gains[static_cast<std::size_t>(t)].col(i);
        }
      }
      raw_energy += m.squaredNorm();
    }
    raw_energy /= static_cast<double>(dims.n_sub);

    // normalize: avg_f ||mean||_F^2 = (1 - var0_scale) * m_r * m_t,
    // avg_f sum(omega) = m_r * m_t, var0 = var0_scale * omega. Then
    // E||H||_F^2 = m_r * m_t holds at every aging stage.
    const double mean_scale = std::sqrt((1.0 - var0_scale) * target / raw_energy);
    for (int f = 0; f < dims.n_sub; ++f)
      st.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] *= mean_scale;

    rmat om = rmat::Zero(dims.m_r, dims.m_t);
    for (int i = 0; i < sparsity_b; ++i) {
      const int q = support[static_cast<std::size_t>(i)];
      om.col(q).setConstant(target * wq[static_cast<std::size_t>(i)] / static_cast<double>(dims.m_r));
    }
    st.omega[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(dims.n_sub), om);
    st.var[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(dims.n_sub),
                                               rmat(var0_scale * om));
  }

  const std::vector<double> sched = default_aging_schedule(dims.n_blocks);
  st.aging.reserve(static_cast<std::size_t>(dims.n_blocks));
  for (double a : sched) st.aging.push_back(rmat::Constant(dims.k_users, dims.n_sub, a));

  st.check_shapes();
  return st;
}

ChannelStats evolve_stats(const ChannelStats& stats0, int block_index) {
  require(stats0.block == 0, "evolve_stats: input must be block-0 statistics");
  require(block_index >= 0 && block_index <= stats0.n_blocks(), "evolve_stats: block index out of range");
  ChannelStats st = stats0;
  st.block = block_index;
  if (block_index == 0) return st;
  const rmat& beta = stats0.aging[static_cast<std::size_t>(block_index - 1)];
  for (int k = 0; k < st.k_users; ++k) {
    for (int f = 0; f < st.n_sub; ++f) {
      const double b = beta(k, f);
      auto& m = st.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      auto& v = st.var[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      const auto& om = stats0.omega[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      m *= b;
      v = (b * b) * v + (1.0 - b * b) * om;
    }
  }
  return st;
}

ChannelSample sample_channel(const ChannelStats& stats, const Rng& stream) {
  ChannelSample s;
  s.h.assign(static_cast<std::size_t>(stats.k_users), {});
  for (int k = 0; k < stats.k_users; ++k) {
    s.h[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(stats.n_sub));
    for (int f = 0; f < stats.n_sub; ++f) {
      Rng g = stream.child(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(f));
      const auto& m = stats.mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      const auto& v = stats.var[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)];
      cmat h(stats.m_r, stats.m_t);
      for (int r = 0; r < stats.m_r; ++r)
        for (int q = 0; q < stats.m_t; ++q) h(r, q) = m(r, q) + std::sqrt(v(r, q)) * g.cgauss();
      s.h[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] = std::move(h);
    }
  }
  return s;
}

}  // namespace rlddu::channel
