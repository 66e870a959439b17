// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlddu/config.hpp"
#include "rlddu/types.hpp"

namespace rlddu::harness {

/// One algorithm row of an experiment: solver family plus its knobs.
struct AlgoSpec {
  std::string name;               ///< wmmse | swmmse | du | rlddu
  int iters = 5;                  ///< BCD iterations or unfolded layers
  int saa_batch = 4;              ///< SAA draws per iteration (swmmse)
  int f_tilde = 5;                ///< sampled subcarrier nodes (du, rlddu)
  std::string checkpoint = "none";  ///< rlddu policy source, or "none" for zero compensation
};

struct ExperimentConfig {
  SystemDims dims;
  int sparsity_b = 4;
  int taps = 3;
  double var0_scale = 0.0;
  double snr_db = 10.0;
  std::uint64_t seed = 1;
  int n_seeds = 1;
  std::vector<int> blocks;
  std::vector<AlgoSpec> algos;
  int n_mc = 512;
  std::string out_dir = "out";
};

/// Consumes every key it understands and rejects leftovers. Enforces
/// positive-multiple-of-12 subcarrier counts, a nonempty algorithm list,
/// valid block indices, and the existence of referenced checkpoints.
ExperimentConfig load_experiment(cfg::KeyValues& kv);

struct TrainingConfig {
  SystemDims dims;
  int sparsity_b = 4;
  int taps = 3;
  double var0_scale = 0.0;
  double snr_db = 10.0;
  std::uint64_t seed = 1;
  bool fresh_scenario = true;
  std::vector<int> blocks;
  int f_tilde = 5;
  int i_max = 5;
  int n_mc = 64;
  int episodes = 200;
  int train_seeds = 1;
  double lr = 1e-3;
  double clip = 10.0;
  double baseline_rho = 0.05;
  double guard_reward = 1e6;
  double guard_grad = 1e6;
  int conv_channels = 8;
  int fc_width = 128;
  std::string out_dir = "out";
};

TrainingConfig load_training(cfg::KeyValues& kv);

/// Deterministic per-(algorithm, block, seed) results. Wall times live in a
/// separate timing file so the report stays byte-identical across reruns.
struct ReportRow {
  std::string algorithm;
  int block = 0;
  int k_users = 0;
  double snr_db = 0.0;
  int seed = 0;
  double ewsr = 0.0;
  double mean_depth = 0.0;
  double flops_formula = 0.0;
  double flops_measured = 0.0;
};

struct TimingRow {
  std::string algorithm;
  int block = 0;
  int seed = 0;
  double wall_s = 0.0;
};

struct RunResult {
  std::vector<ReportRow> rows;
  std::vector<TimingRow> timing;
};

/// Evaluates the whole (seed x block x algorithm) grid. Grid points run on
/// `threads` workers into preallocated slots; row order and content are
/// independent of the worker count. All algorithms at one grid point share
/// the channel statistics and the evaluation draws.
RunResult run_experiment(const ExperimentConfig& cfg, int threads, bool instrument);

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows);

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
  bool instrument = false;
};

/// Subcommand entry points. Return a process exit code and report failures
/// on stderr instead of throwing.
int cmd_run(const std::string& config_path, const CliOptions& cli);
int cmd_train(const std::string& config_path, const CliOptions& cli);
int cmd_flops(const std::string& config_path, const CliOptions& cli);
int cmd_selftest(const CliOptions& cli);

}  // namespace rlddu::harness
