// SPDX-License-Identifier: Apache-2.0
#include "rlddu/rl_policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rlddu/swmmse.hpp"

namespace rlddu::rl {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

/// Hermitian pack: diagonal (real), then lower triangle column by column as
/// (real, imag). m_r * m_r reals total.
void pack_hermitian(const cmat& z, double* dst) {
  const int n = int(z.rows());
  int i = 0;
  for (int d = 0; d < n; ++d) dst[i++] = z(d, d).real();
  for (int c = 0; c < n; ++c)
    for (int r = c + 1; r < n; ++r) {
      dst[i++] = z(r, c).real();
      dst[i++] = z(r, c).imag();
    }
}

cmat unpack_hermitian(const double* src, int n) {
  cmat z(n, n);
  int i = 0;
  for (int d = 0; d < n; ++d) z(d, d) = cplx(src[i++], 0.0);
  for (int c = 0; c < n; ++c)
    for (int r = c + 1; r < n; ++r) {
      z(r, c) = cplx(src[i], src[i + 1]);
      z(c, r) = std::conj(z(r, c));
      i += 2;
    }
  return z;
}

/// Full complex pack: row-major (real, imag) pairs. 2 * m_r * m_r reals.
void pack_full(const cmat& m, double* dst) {
  int i = 0;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      dst[i++] = m(r, c).real();
      dst[i++] = m(r, c).imag();
    }
}

cmat unpack_full(const double* src, int n) {
  cmat m(n, n);
  int i = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      m(r, c) = cplx(src[i], src[i + 1]);
      i += 2;
    }
  return m;
}

}  // namespace

int ActionLayout::layer_of(int d) const {
  if (d < 0 || d >= dim()) throw std::out_of_range("ActionLayout: dimension out of range");
  if (d >= comp_dims()) return -1;
  return d / (k_users * n_nodes * per_node());
}

rvec ActionLayout::encode(const std::vector<du::CompensationSet>& comps, const rvec& beta) const {
  require(int(comps.size()) == i_max, "ActionLayout: layer count mismatch");
  require(int(beta.size()) == i_max, "ActionLayout: beta length mismatch");
  rvec a(dim());
  int off = 0;
  const int mm = m_r * m_r;
  for (int i = 0; i < i_max; ++i) {
    const auto& c = comps[size_t(i)];
    require(int(c.z_a.size()) == k_users && int(c.z_a[0].size()) == n_nodes,
            "ActionLayout: compensation shape mismatch");
    for (int k = 0; k < k_users; ++k)
      for (int j = 0; j < n_nodes; ++j) {
        pack_hermitian(c.z_a[size_t(k)][size_t(j)], a.data() + off);
        off += mm;
        pack_hermitian(c.z_c[size_t(k)][size_t(j)], a.data() + off);
        off += mm;
        pack_full(c.o_e[size_t(k)][size_t(j)], a.data() + off);
        off += 2 * mm;
        pack_full(c.o_f[size_t(k)][size_t(j)], a.data() + off);
        off += 2 * mm;
        pack_full(c.o_g[size_t(k)][size_t(j)], a.data() + off);
        off += 2 * mm;
      }
  }
  a.segment(off, i_max) = beta;
  return a;
}

ActionLayout::Decoded ActionLayout::decode(const rvec& a) const {
  require(int(a.size()) == dim(), "ActionLayout: action length mismatch");
  Decoded out;
  out.comps = du::zero_compensation(i_max, k_users, n_nodes, m_r);
  int off = 0;
  const int mm = m_r * m_r;
  for (int i = 0; i < i_max; ++i) {
    auto& c = out.comps[size_t(i)];
    for (int k = 0; k < k_users; ++k)
      for (int j = 0; j < n_nodes; ++j) {
        c.z_a[size_t(k)][size_t(j)] = unpack_hermitian(a.data() + off, m_r);
        off += mm;
        c.z_c[size_t(k)][size_t(j)] = unpack_hermitian(a.data() + off, m_r);
        off += mm;
        c.o_e[size_t(k)][size_t(j)] = unpack_full(a.data() + off, m_r);
        off += 2 * mm;
        c.o_f[size_t(k)][size_t(j)] = unpack_full(a.data() + off, m_r);
        off += 2 * mm;
        c.o_g[size_t(k)][size_t(j)] = unpack_full(a.data() + off, m_r);
        off += 2 * mm;
      }
  }
  out.beta = a.segment(off, i_max);
  return out;
}

int select_depth(const rvec& beta) {
  if (beta.size() == 0) throw std::invalid_argument("select_depth: empty input");
  int best = 0;
  for (int i = 1; i < beta.size(); ++i)
    if (beta(i) > beta(best)) best = i;
  return best + 1;
}

std::vector<rmat> encode_context(const channel::ChannelStats& stats,
                                 const accel::BeamSupport& support, const SystemDims& dims,
                                 const std::vector<int>& sampled) {
  const int nn = int(sampled.size());
  std::vector<rmat> ctx(4, rmat::Zero(dims.k_users, nn));
  for (int k = 0; k < dims.k_users; ++k) {
    const auto ku = size_t(k);
    for (int j = 0; j < nn; ++j) {
      const auto fu = size_t(sampled[size_t(j)]);
      double mean_e = 0.0;
      for (int q : support.cols[ku]) mean_e += stats.mean[ku][fu].col(q).squaredNorm();
      ctx[0](k, j) = mean_e;
      ctx[1](k, j) = stats.var[ku][fu].sum();
      ctx[2](k, j) = stats.block == 0
                         ? 1.0
                         : stats.aging[size_t(stats.block - 1)](k, sampled[size_t(j)]);
      ctx[3](k, j) = std::log(dims.p_max / dims.noise_vars[ku]);
    }
  }
  return ctx;
}

std::size_t PolicyParams::n_params() const {
  return mean_net.n_params() + logstd_net.n_params() + std::size_t(log_gains.size());
}

void PolicyParams::params_to(double* dst) const {
  mean_net.params_to(dst);
  dst += mean_net.n_params();
  logstd_net.params_to(dst);
  dst += logstd_net.n_params();
  for (int i = 0; i < log_gains.size(); ++i) *dst++ = log_gains(i);
}

void PolicyParams::params_from(const double* src) {
  mean_net.params_from(src);
  src += mean_net.n_params();
  logstd_net.params_from(src);
  src += logstd_net.n_params();
  for (int i = 0; i < log_gains.size(); ++i) log_gains(i) = *src++;
}

PolicyParams make_policy(const nets::NetShape& shape, std::vector<int> gain_group, int n_gains,
                         Rng& rng) {
  require(int(gain_group.size()) == shape.out, "make_policy: gain map length mismatch");
  for (int g : gain_group)
    require(g >= -1 && g < n_gains, "make_policy: gain index out of range");
  PolicyParams p;
  Rng r1 = rng.child(1);
  Rng r2 = rng.child(2);
  p.mean_net.init(shape, r1);
  p.logstd_net.init(shape, r2);
  p.log_gains = rvec::Constant(n_gains, std::log(0.01));
  p.gain_group = std::move(gain_group);
  return p;
}

namespace {
constexpr double kLogStdLo = -5.0;
constexpr double kLogStdHi = 2.0;
}  // namespace

PolicyEval policy_forward(PolicyParams& p, const std::vector<rmat>& ctx) {
  PolicyEval e;
  e.mu_raw = p.mean_net.forward(ctx);
  e.ls_raw = p.logstd_net.forward(ctx);
  const int n = int(e.mu_raw.size());
  e.mu_eff.resize(n);
  e.ls_eff.resize(n);
  for (int d = 0; d < n; ++d) {
    const int g = p.gain_group[size_t(d)];
    const double lg = g >= 0 ? p.log_gains(g) : 0.0;
    const double ls = std::clamp(e.ls_raw(d), kLogStdLo, kLogStdHi);
    e.mu_eff(d) = std::exp(lg) * e.mu_raw(d);
    e.ls_eff(d) = ls + lg;
  }
  return e;
}

namespace {

double gaussian_logp(const rvec& a, const rvec& mu, const rvec& ls) {
  double logp = 0.0;
  for (int d = 0; d < a.size(); ++d) {
    const double z = (a(d) - mu(d)) * std::exp(-ls(d));
    logp += -0.5 * z * z - ls(d) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return logp;
}

}  // namespace

std::pair<rvec, double> policy_sample(PolicyParams& p, const std::vector<rmat>& ctx,
                                      const Rng& rng) {
  const PolicyEval e = policy_forward(p, ctx);
  Rng stream = rng.child(0x5A11);
  rvec a(e.mu_eff.size());
  for (int d = 0; d < a.size(); ++d) a(d) = e.mu_eff(d) + std::exp(e.ls_eff(d)) * stream.gauss();
  return {a, gaussian_logp(a, e.mu_eff, e.ls_eff)};
}

double policy_logp(PolicyParams& p, const std::vector<rmat>& ctx, const rvec& action) {
  const PolicyEval e = policy_forward(p, ctx);
  return gaussian_logp(action, e.mu_eff, e.ls_eff);
}

rvec policy_logp_grad(PolicyParams& p, const std::vector<rmat>& ctx, const rvec& action,
                      double* logp) {
  const PolicyEval e = policy_forward(p, ctx);
  if (logp) *logp = gaussian_logp(action, e.mu_eff, e.ls_eff);

  const int n = int(action.size());
  rvec d_mu_raw(n), d_ls_raw(n);
  rvec d_gains = rvec::Zero(p.log_gains.size());
  for (int d = 0; d < n; ++d) {
    const int g = p.gain_group[size_t(d)];
    const double gain = g >= 0 ? std::exp(p.log_gains(g)) : 1.0;
    const double sd = std::exp(e.ls_eff(d));
    const double z = (action(d) - e.mu_eff(d)) / sd;
    const double d_mu_eff = z / sd;
    const double d_ls_eff = z * z - 1.0;
    d_mu_raw(d) = gain * d_mu_eff;
    const bool pass = e.ls_raw(d) > kLogStdLo && e.ls_raw(d) < kLogStdHi;
    d_ls_raw(d) = pass ? d_ls_eff : 0.0;
    if (g >= 0) d_gains(g) += d_mu_eff * e.mu_eff(d) + d_ls_eff;
  }

  p.mean_net.zero_grad();
  p.logstd_net.zero_grad();
  p.mean_net.backward(d_mu_raw);
  p.logstd_net.backward(d_ls_raw);

  rvec g(p.n_params());
  p.mean_net.grads_to(g.data());
  p.logstd_net.grads_to(g.data() + p.mean_net.n_params());
  g.tail(p.log_gains.size()) = d_gains;
  return g;
}

PrecoderSet run_rlddu(const channel::ChannelStats& stats, const SystemDims& dims,
                      const rvec& action, const ActionLayout& layout,
                      const std::vector<int>& sampled, const du::DuOptions& opts,
                      const PrecoderSet* x0, du::NetDiagnostics* diag,
                      accel::FlopCounter* fc) {
  const ActionLayout::Decoded dec = layout.decode(action);
  const int depth = select_depth(dec.beta);
  std::vector<du::CompensationSet> comps(dec.comps.begin(), dec.comps.begin() + depth);
  const PrecoderSet start =
      x0 ? *x0 : channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
  return du::run_du_network(stats, dims, start, comps, sampled, opts, diag, fc);
}

double reward(const channel::ChannelStats& stats, const SystemDims& dims, const rvec& action,
              const ActionLayout& layout, const std::vector<int>& sampled,
              const RewardOptions& opts, const Rng& rng, const PrecoderSet* x0) {
  const PrecoderSet start = channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
  const PrecoderSet x_act =
      run_rlddu(stats, dims, action, layout, sampled, opts.du, x0 ? x0 : &start);
  const PrecoderSet x_base =
      du::run_du_network(stats, dims, start,
                         du::zero_compensation(opts.i_max, layout.k_users, layout.n_nodes,
                                               layout.m_r),
                         sampled, opts.du);
  const double ew_act =
      swmmse::ewsr_eval(stats, channel::precoders_to_antenna(x_act), opts.n_mc, rng, dims);
  const double ew_base =
      swmmse::ewsr_eval(stats, channel::precoders_to_antenna(x_base), opts.n_mc, rng, dims);
  return ew_act - ew_base;
}

MimoEnv::MimoEnv(MimoEnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.dims.validate();
  require(!cfg_.sampled.empty(), "MimoEnv: sampled nodes required");
  require(!cfg_.blocks.empty(), "MimoEnv: at least one block");
  for (int b : cfg_.blocks) require(b >= 0, "MimoEnv: negative block");
  layout_.i_max = cfg_.i_max;
  layout_.k_users = cfg_.dims.k_users;
  layout_.n_nodes = int(cfg_.sampled.size());
  layout_.m_r = cfg_.dims.m_r;
  stats_ = channel::evolve_stats(
      channel::make_scenario(cfg_.dims, cfg_.sparsity_b, cfg_.scenario_seed, cfg_.taps,
                             cfg_.var0_scale),
      cfg_.blocks.front());
}

std::array<int, 3> MimoEnv::context_shape() const {
  return {4, cfg_.dims.k_users, int(cfg_.sampled.size())};
}

std::vector<rmat> MimoEnv::sample_context(const Rng& rng) {
  Rng stream = rng.child(0xC02);
  const std::uint64_t seed =
      cfg_.fresh_scenario ? stream.next_u64() : cfg_.scenario_seed;
  const int block = cfg_.blocks[size_t(stream.uniform_int(cfg_.blocks.size()))];
  stats_ = channel::evolve_stats(
      channel::make_scenario(cfg_.dims, cfg_.sparsity_b, seed, cfg_.taps, cfg_.var0_scale),
      block);
  const int cap = cfg_.du.b_cap > 0 ? cfg_.du.b_cap : cfg_.dims.m_t;
  const accel::BeamSupport sup = accel::prune_support(stats_, cfg_.du.energy_keep, cap);
  return encode_context(stats_, sup, cfg_.dims, cfg_.sampled);
}

double MimoEnv::reward(const rvec& action, const Rng& rng) {
  RewardOptions opts;
  opts.n_mc = cfg_.n_mc;
  opts.i_max = cfg_.i_max;
  opts.du = cfg_.du;
  return rl::reward(stats_, cfg_.dims, action, layout_, cfg_.sampled, opts, rng);
}

int MimoEnv::depth_of(const rvec& action) const {
  return select_depth(action.tail(layout_.i_max));
}

std::vector<int> MimoEnv::gain_group_map() const {
  std::vector<int> map(size_t(layout_.dim()));
  for (int d = 0; d < layout_.dim(); ++d) map[size_t(d)] = layout_.layer_of(d);
  return map;
}

TrainResult train_policy(PolicyEnv& env, const PolicyParams& params0, const TrainOptions& opts,
                         const Rng& rng) {
  require(opts.episodes >= 1, "train_policy: episodes >= 1");
  TrainResult res;
  res.params = params0;
  double baseline = 0.0;
  bool baseline_ready = false;

  rvec theta(res.params.n_params());
  for (int e = 0; e < opts.episodes; ++e) {
    const Rng re = rng.child(std::uint64_t(e));
    const std::vector<rmat> ctx = env.sample_context(re.child(1));
    auto [action, logp] = policy_sample(res.params, ctx, re.child(2));
    (void)logp;

    TraceRow row;
    row.episode = e;
    row.depth = env.depth_of(action);

    double r = std::numeric_limits<double>::quiet_NaN();
    try {
      r = env.reward(action, re.child(3));
    } catch (const std::exception&) {
    }
    row.reward = r;
    const bool reward_ok = std::isfinite(r) && std::abs(r) <= opts.guard_reward;

    bool baseline_init = false;
    if (reward_ok && !baseline_ready) {
      baseline = r;
      baseline_ready = true;
      baseline_init = true;
    }
    const double adv = reward_ok ? r - baseline : 0.0;

    const rvec g = policy_logp_grad(res.params, ctx, action);
    const rvec step = adv * g;
    row.grad_norm = step.norm();

    row.skipped = !reward_ok || !std::isfinite(row.grad_norm) || row.grad_norm > opts.guard_grad;
    if (!row.skipped && opts.lr != 0.0) {
      rvec clipped = step;
      if (row.grad_norm > opts.clip && row.grad_norm > 0.0)
        clipped *= opts.clip / row.grad_norm;
      res.params.params_to(theta.data());
      theta += opts.lr * clipped;
      res.params.params_from(theta.data());
    }
    if (row.skipped) ++res.skipped;
    if (reward_ok && !baseline_init) baseline += opts.baseline_rho * (r - baseline);
    res.trace.push_back(row);
  }
  return res;
}

namespace {
constexpr char kMagic[8] = {'R', 'L', 'D', 'D', 'U', 'P', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;

void write_i32(std::ofstream& f, std::int32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::int32_t read_i32(std::ifstream& f) {
  std::int32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void save_policy(const std::string& path, const PolicyParams& p) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_policy: cannot open " + path);
  f.write(kMagic, sizeof kMagic);
  f.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  const nets::NetShape& s = p.mean_net.shape;
  for (int v : {s.in_c, s.h, s.w, s.conv_c, s.kernel, s.fc, s.out, int(p.log_gains.size())})
    write_i32(f, v);
  for (int g : p.gain_group) write_i32(f, g);
  std::vector<double> buf(p.n_params());
  p.params_to(buf.data());
  f.write(reinterpret_cast<const char*>(buf.data()),
          std::streamsize(buf.size() * sizeof(double)));
  if (!f) throw std::runtime_error("save_policy: write failed for " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_policy: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof magic);
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!f || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kVersion)
    throw std::runtime_error("load_policy: bad header in " + path);
  nets::NetShape s;
  s.in_c = read_i32(f);
  s.h = read_i32(f);
  s.w = read_i32(f);
  s.conv_c = read_i32(f);
  s.kernel = read_i32(f);
  s.fc = read_i32(f);
  s.out = read_i32(f);
  const int n_gains = read_i32(f);
  std::vector<int> groups(size_t(s.out));
  for (auto& g : groups) g = read_i32(f);
  Rng dummy(0);
  PolicyParams p = make_policy(s, std::move(groups), n_gains, dummy);
  std::vector<double> buf(p.n_params());
  f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(double)));
  if (!f) throw std::runtime_error("load_policy: truncated file " + path);
  p.params_from(buf.data());
  return p;
}

}  // namespace rlddu::rl
