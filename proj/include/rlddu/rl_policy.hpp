// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rlddu/channel.hpp"
#include "rlddu/du_core.hpp"
#include "rlddu/nets.hpp"
#include "rlddu/rng.hpp"
#include "rlddu/types.hpp"

namespace rlddu::rl {

/// Flat real encoding of per-layer compensation sets plus stopping
/// coefficients. Order: for each layer, user, node: z_a, z_c as Hermitian
/// packs (diagonal, then lower-triangle real/imag), then o_e, o_f, o_g as
/// full complex packs (row-major real/imag); the last i_max entries are the
/// stopping coefficients.
struct ActionLayout {
  int i_max = 0, k_users = 0, n_nodes = 0, m_r = 0;

  [[nodiscard]] int per_node() const { return 8 * m_r * m_r; }
  [[nodiscard]] int comp_dims() const { return i_max * k_users * n_nodes * per_node(); }
  [[nodiscard]] int dim() const { return comp_dims() + i_max; }
  /// Unfolding layer owning this action dimension; -1 for stopping entries.
  [[nodiscard]] int layer_of(int d) const;

  [[nodiscard]] rvec encode(const std::vector<du::CompensationSet>& comps,
                            const rvec& beta) const;
  struct Decoded {
    std::vector<du::CompensationSet> comps;
    rvec beta;
  };
  [[nodiscard]] Decoded decode(const rvec& a) const;
};

/// 1-based argmax of the stopping coefficients; ties go to the smallest
/// index. Throws on empty input.
int select_depth(const rvec& beta);

/// Context tensor: 4 channels of shape (k_users x |sampled|): support mean
/// energy, total variance energy, aging coefficient, log(p_max / sigma_k^2).
std::vector<rmat> encode_context(const channel::ChannelStats& stats,
                                 const accel::BeamSupport& support, const SystemDims& dims,
                                 const std::vector<int>& sampled);

/// Diagonal-Gaussian policy: two networks produce the action mean and
/// log-std; per-layer gains scale the compensation dimensions inside the
/// distribution (mean and std alike), so an untrained policy stays near the
/// uncompensated baseline.
struct PolicyParams {
  nets::Mlp mean_net, logstd_net;
  rvec log_gains;               ///< one per unfolding layer
  std::vector<int> gain_group;  ///< action dim -> gain index, -1 for ungained

  [[nodiscard]] std::size_t n_params() const;
  void params_to(double* dst) const;
  void params_from(const double* src);
};

PolicyParams make_policy(const nets::NetShape& shape, std::vector<int> gain_group, int n_gains,
                         Rng& rng);

/// Effective distribution parameters at a context.
struct PolicyEval {
  rvec mu_raw, ls_raw, mu_eff, ls_eff;
};
PolicyEval policy_forward(PolicyParams& p, const std::vector<rmat>& ctx);

/// Draws a = mu_eff + exp(ls_eff) * eps and returns the exact diagonal
/// Gaussian log density at a.
std::pair<rvec, double> policy_sample(PolicyParams& p, const std::vector<rmat>& ctx,
                                      const Rng& rng);

double policy_logp(PolicyParams& p, const std::vector<rmat>& ctx, const rvec& action);

/// d log pi(action | ctx) / d theta over all parameters, in checkpoint order
/// (mean net, logstd net, log gains).
rvec policy_logp_grad(PolicyParams& p, const std::vector<rmat>& ctx, const rvec& action,
                      double* logp = nullptr);

/// Unrolls select_depth(beta) compensated layers from the matched-filter
/// start (or `x0` when given) and scales to the power budget. Beam domain.
PrecoderSet run_rlddu(const channel::ChannelStats& stats, const SystemDims& dims,
                      const rvec& action, const ActionLayout& layout,
                      const std::vector<int>& sampled, const du::DuOptions& opts,
                      const PrecoderSet* x0 = nullptr, du::NetDiagnostics* diag = nullptr,
                      accel::FlopCounter* fc = nullptr);

struct RewardOptions {
  int n_mc = 256;
  int i_max = 5;
  du::DuOptions du;
};

/// ewsr(run_rlddu(action)) - ewsr(uncompensated i_max-layer network), both
/// evaluated on identical channel draws. `x0` overrides the starting point
/// of the compensated network only; the baseline keeps the matched-filter
/// start.
double reward(const channel::ChannelStats& stats, const SystemDims& dims, const rvec& action,
              const ActionLayout& layout, const std::vector<int>& sampled,
              const RewardOptions& opts, const Rng& rng, const PrecoderSet* x0 = nullptr);

/// One-step environment: per-episode context, reward for a sampled action.
class PolicyEnv {
 public:
  virtual ~PolicyEnv() = default;
  [[nodiscard]] virtual int action_dim() const = 0;
  [[nodiscard]] virtual std::array<int, 3> context_shape() const = 0;  ///< (c, h, w)
  virtual std::vector<rmat> sample_context(const Rng& rng) = 0;
  virtual double reward(const rvec& action, const Rng& rng) = 0;
  [[nodiscard]] virtual int depth_of(const rvec& /*action*/) const { return 0; }
};

/// Known-optimum sanity environment: reward -(a - 2)^2 at a fixed context.
class QuadraticBandit final : public PolicyEnv {
 public:
  [[nodiscard]] int action_dim() const override { return 1; }
  [[nodiscard]] std::array<int, 3> context_shape() const override { return {1, 1, 1}; }
  std::vector<rmat> sample_context(const Rng&) override { return {rmat::Ones(1, 1)}; }
  double reward(const rvec& a, const Rng&) override { return -(a(0) - 2.0) * (a(0) - 2.0); }
};

struct MimoEnvConfig {
  SystemDims dims;
  int sparsity_b = 4;
  int taps = 3;
  double var0_scale = 0.0;
  std::uint64_t scenario_seed = 1;
  bool fresh_scenario = true;  ///< draw a new scenario every episode
  std::vector<int> blocks;     ///< aging blocks sampled uniformly per episode
  std::vector<int> sampled;    ///< subcarrier nodes
  int i_max = 5;
  int n_mc = 64;  ///< reward draws during training
  du::DuOptions du;
};

/// Wideband precoding bandit: context from evolved channel statistics,
/// reward from the compensated network against the uncompensated baseline.
class MimoEnv final : public PolicyEnv {
 public:
  explicit MimoEnv(MimoEnvConfig cfg);
  [[nodiscard]] int action_dim() const override { return layout_.dim(); }
  [[nodiscard]] std::array<int, 3> context_shape() const override;
  std::vector<rmat> sample_context(const Rng& rng) override;
  double reward(const rvec& action, const Rng& rng) override;
  [[nodiscard]] int depth_of(const rvec& action) const override;

  [[nodiscard]] const ActionLayout& layout() const { return layout_; }
  [[nodiscard]] std::vector<int> gain_group_map() const;
  [[nodiscard]] const channel::ChannelStats& current_stats() const { return stats_; }

 private:
  MimoEnvConfig cfg_;
  ActionLayout layout_;
  channel::ChannelStats stats_;
};

struct TrainOptions {
  int episodes = 1000;
  double lr = 1e-3;
  double clip = 10.0;           ///< max update norm after advantage weighting
  double baseline_rho = 0.05;   ///< running-mean reward tracking rate
  double guard_reward = 1e6;    ///< divergence guard bounds
  double guard_grad = 1e6;
};

struct TraceRow {
  int episode = 0;
  double reward = 0.0;
  int depth = 0;
  double grad_norm = 0.0;
  bool skipped = false;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TraceRow> trace;
  int skipped = 0;
};

/// Score-function gradient ascent with a running-mean baseline, gradient
/// clipping and a divergence guard (offending episodes are skipped and
/// flagged). Deterministic given the stream.
TrainResult train_policy(PolicyEnv& env, const PolicyParams& params0, const TrainOptions& opts,
                         const Rng& rng);

/// Binary checkpoint: architecture header, gain map, then raw parameters.
/// Round-trips bit-exactly on the same platform.
void save_policy(const std::string& path, const PolicyParams& p);
PolicyParams load_policy(const std::string& path);

}  // namespace rlddu::rl
