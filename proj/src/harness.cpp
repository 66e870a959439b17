// SPDX-License-Identifier: Apache-2.0
#include "rlddu/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "rlddu/accel.hpp"
#include "rlddu/channel.hpp"
#include "rlddu/du_core.hpp"
#include "rlddu/rl_policy.hpp"
#include "rlddu/swmmse.hpp"

namespace rlddu::harness {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error("experiment config: " + msg);
}

SystemDims load_dims(cfg::KeyValues& kv) {
  const int m_t = int(kv.get_int("m_t"));
  const int m_r = int(kv.get_int("m_r"));
  const int k_users = int(kv.get_int("k_users"));
  const int n_sub = int(kv.get_int("n_sub"));
  const int n_blocks = int(kv.get_int("n_blocks", 6));
  const double p_max = kv.get_double("p_max", 1.0);
  const double snr_db = kv.get_double("snr_db", 10.0);
  require(n_sub > 0 && n_sub % 12 == 0, "n_sub must be a positive multiple of 12");
  const double noise = p_max * std::pow(10.0, -snr_db / 10.0);
  SystemDims dims = SystemDims::make(m_t, m_r, k_users, n_sub, n_blocks, p_max, noise);
  dims.validate();
  return dims;
}

std::vector<int> load_blocks(cfg::KeyValues& kv, const SystemDims& dims) {
  std::vector<int> blocks;
  for (long long b : kv.get_int_list("blocks", {1})) {
    require(b >= 0 && b <= dims.n_blocks, "block index out of range: " + std::to_string(b));
    blocks.push_back(int(b));
  }
  require(!blocks.empty(), "blocks list is empty");
  return blocks;
}

std::string fmt(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& l : lines) f << l << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::uint64_t scenario_seed(std::uint64_t root, int s) {
  Rng r = Rng(root).child(0x5CE0, std::uint64_t(s));
  return r.next_u64();
}

}  // namespace

ExperimentConfig load_experiment(cfg::KeyValues& kv) {
  ExperimentConfig ec;
  ec.dims = load_dims(kv);
  ec.snr_db = -10.0 * std::log10(ec.dims.noise_vars[0] / ec.dims.p_max);
  ec.sparsity_b = int(kv.get_int("sparsity_b", 4));
  ec.taps = int(kv.get_int("taps", 3));
  ec.var0_scale = kv.get_double("var0_scale", 0.0);
  ec.seed = kv.get_u64("seed", 1);
  ec.n_seeds = int(kv.get_int("n_seeds", 1));
  require(ec.n_seeds >= 1, "n_seeds must be >= 1");
  ec.blocks = load_blocks(kv, ec.dims);
  ec.n_mc = int(kv.get_int("n_mc", 512));
  require(ec.n_mc >= 1, "n_mc must be >= 1");
  ec.out_dir = kv.get_string("out_dir", "out");

  const auto names = kv.get_string_list("algos");
  require(!names.empty(), "algorithm list is empty");
  for (const auto& name : names) {
    AlgoSpec a;
    a.name = name;
    if (name == "wmmse") {
      a.iters = int(kv.get_int("wmmse.iters", 5));
    } else if (name == "swmmse") {
      a.iters = int(kv.get_int("swmmse.iters", 5));
      a.saa_batch = int(kv.get_int("swmmse.saa_batch", 4));
    } else if (name == "du") {
      a.iters = int(kv.get_int("du.layers", 5));
      a.f_tilde = int(kv.get_int("du.f_tilde", 5));
    } else if (name == "rlddu") {
      a.iters = int(kv.get_int("rlddu.layers", 5));
      a.f_tilde = int(kv.get_int("rlddu.f_tilde", 5));
      a.checkpoint = kv.get_string("rlddu.checkpoint", "none");
      require(a.checkpoint == "none" || std::filesystem::exists(a.checkpoint),
              "rlddu.checkpoint does not exist: " + a.checkpoint);
    } else {
      require(false, "unknown algorithm: " + name);
    }
    require(a.iters >= 1, name + ": iterations must be >= 1");
    require(a.f_tilde >= 3 && a.f_tilde <= ec.dims.n_sub,
            name + ": f_tilde must be in [3, n_sub]");
    ec.algos.push_back(std::move(a));
  }
  kv.reject_unknown();
  return ec;
}

TrainingConfig load_training(cfg::KeyValues& kv) {
  TrainingConfig tc;
  tc.dims = load_dims(kv);
  tc.snr_db = -10.0 * std::log10(tc.dims.noise_vars[0] / tc.dims.p_max);
  tc.sparsity_b = int(kv.get_int("sparsity_b", 4));
  tc.taps = int(kv.get_int("taps", 3));
  tc.var0_scale = kv.get_double("var0_scale", 0.0);
  tc.seed = kv.get_u64("seed", 1);
  tc.fresh_scenario = kv.get_bool("fresh_scenario", true);
  tc.blocks = load_blocks(kv, tc.dims);
  tc.f_tilde = int(kv.get_int("f_tilde", 5));
  require(tc.f_tilde >= 3 && tc.f_tilde <= tc.dims.n_sub, "f_tilde must be in [3, n_sub]");
  tc.i_max = int(kv.get_int("i_max", 5));
  require(tc.i_max >= 1, "i_max must be >= 1");
  tc.n_mc = int(kv.get_int("n_mc", 64));
  require(tc.n_mc >= 1, "n_mc must be >= 1");
  tc.episodes = int(kv.get_int("episodes", 200));
  require(tc.episodes >= 1, "episodes must be >= 1");
  tc.train_seeds = int(kv.get_int("train_seeds", 1));
  require(tc.train_seeds >= 1, "train_seeds must be >= 1");
  tc.lr = kv.get_double("lr", 1e-3);
  tc.clip = kv.get_double("clip", 10.0);
  tc.baseline_rho = kv.get_double("baseline_rho", 0.05);
  tc.guard_reward = kv.get_double("guard_reward", 1e6);
  tc.guard_grad = kv.get_double("guard_grad", 1e6);
  tc.conv_channels = int(kv.get_int("conv_channels", 8));
  tc.fc_width = int(kv.get_int("fc_width", 128));
  tc.out_dir = kv.get_string("out_dir", "out");
  kv.reject_unknown();
  return tc;
}

namespace {

struct LoadedPolicy {
  rl::PolicyParams params;
  bool present = false;
};

/// Solves one algorithm at one grid point. Returns antenna-domain precoders
/// plus the depth actually used.
struct SolveOutput {
  PrecoderSet v;
  double depth = 0.0;
  double flops_measured = 0.0;
};

SolveOutput solve_algo(const ExperimentConfig& cfg, const AlgoSpec& a,
                       const channel::ChannelStats& stats, int s, int b,
                       const LoadedPolicy& policy, bool instrument) {
  SolveOutput out;
  accel::FlopCounter fc;
  fc.enabled = instrument;
  const auto su = std::uint64_t(s);
  const auto bu = std::uint64_t(b);

  if (a.name == "wmmse" || a.name == "swmmse") {
    swmmse::SolveOptions so;
    so.iters = a.iters;
    so.saa_batch = a.saa_batch;
    so.point_estimate = (a.name == "wmmse");
    so.resample = true;
    const auto res =
        swmmse::swmmse_solve(stats, cfg.dims, so, Rng(cfg.seed).child(0x50A0, su, bu));
    out.v = res.v;
    out.depth = double(a.iters);
  } else {
    const auto sampled = accel::uniform_nodes(cfg.dims.n_sub, a.f_tilde);
    const du::DuOptions opts;
    if (a.name == "rlddu" && policy.present) {
      rl::ActionLayout lay{a.iters, cfg.dims.k_users, int(sampled.size()), cfg.dims.m_r};
      const auto sup = accel::prune_support(stats, opts.energy_keep, cfg.dims.m_t);
      const auto ctx = rl::encode_context(stats, sup, cfg.dims, sampled);
      rl::PolicyParams local = policy.params;  // forward passes mutate caches
      const rl::PolicyEval ev = rl::policy_forward(local, ctx);
      const rvec action = ev.mu_eff;
      out.depth = double(rl::select_depth(action.tail(a.iters)));
      const PrecoderSet x =
          rl::run_rlddu(stats, cfg.dims, action, lay, sampled, opts, nullptr, nullptr, &fc);
      out.v = channel::precoders_to_antenna(x);
    } else {
      const PrecoderSet x0 =
          channel::precoders_to_beam(swmmse::initial_precoders(stats, cfg.dims));
      const auto comps =
          du::zero_compensation(a.iters, cfg.dims.k_users, int(sampled.size()), cfg.dims.m_r);
      const PrecoderSet x =
          du::run_du_network(stats, cfg.dims, x0, comps, sampled, opts, nullptr, &fc);
      out.v = channel::precoders_to_antenna(x);
      out.depth = double(a.iters);
    }
  }
  out.flops_measured = fc.total();
  return out;
}

double formula_total(const ExperimentConfig& cfg, const AlgoSpec& a,
                     const LoadedPolicy& policy) {
  accel::FlopConstants c;
  c.b = std::min(c.b, cfg.dims.m_t);
  c.q = std::min(c.q, cfg.dims.m_t);
  c.iters = a.iters;
  c.f_tilde = a.f_tilde;
  std::string tag = "swmmse";
  if (a.name == "du") tag = "po_wmmse";
  if (a.name == "rlddu") {
    tag = "rlddu";
    if (policy.present) {
      c.d = policy.params.mean_net.shape.fc;
      c.c = policy.params.mean_net.shape.conv_c;
      c.h = policy.params.mean_net.shape.kernel;
    }
  }
  return accel::flop_estimate(cfg.dims, tag, c).total;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, int threads, bool instrument) {
  LoadedPolicy policy;
  for (const auto& a : cfg.algos)
    if (a.name == "rlddu" && a.checkpoint != "none") {
      policy.params = rl::load_policy(a.checkpoint);
      policy.present = true;
      const rl::ActionLayout lay{a.iters, cfg.dims.k_users, a.f_tilde, cfg.dims.m_r};
      if (policy.params.mean_net.shape.out != lay.dim())
        throw std::runtime_error("checkpoint action size " +
                                 std::to_string(policy.params.mean_net.shape.out) +
                                 " does not match experiment layout " +
                                 std::to_string(lay.dim()));
    }

  struct Point {
    int s, b;
  };
  std::vector<Point> points;
  for (int s = 0; s < cfg.n_seeds; ++s)
    for (int b : cfg.blocks) points.push_back({s, b});

  const size_t n_algos = cfg.algos.size();
  RunResult rr;
  rr.rows.resize(points.size() * n_algos);
  rr.timing.resize(points.size() * n_algos);

  std::vector<double> formula(n_algos);
  for (size_t ai = 0; ai < n_algos; ++ai) formula[ai] = formula_total(cfg, cfg.algos[ai], policy);

  std::atomic<size_t> cursor{0};
  std::mutex err_mu;
  std::exception_ptr err;

  const auto worker = [&]() {
    for (;;) {
      const size_t pi = cursor.fetch_add(1);
      if (pi >= points.size()) return;
      try {
        const auto [s, b] = points[pi];
        const auto stats = channel::evolve_stats(
            channel::make_scenario(cfg.dims, cfg.sparsity_b, scenario_seed(cfg.seed, s),
                                   cfg.taps, cfg.var0_scale),
            b);
        const Rng eval_rng = Rng(cfg.seed).child(0xE7A1, std::uint64_t(s), std::uint64_t(b));
        for (size_t ai = 0; ai < n_algos; ++ai) {
          const auto& a = cfg.algos[ai];
          const auto t0 = std::chrono::steady_clock::now();
          const SolveOutput so = solve_algo(cfg, a, stats, s, b, policy, instrument);
          const double ewsr = swmmse::ewsr_eval(stats, so.v, cfg.n_mc, eval_rng, cfg.dims);
          const auto t1 = std::chrono::steady_clock::now();

          ReportRow row;
          row.algorithm = a.name;
          row.block = b;
          row.k_users = cfg.dims.k_users;
          row.snr_db = cfg.snr_db;
          row.seed = s;
          row.ewsr = ewsr;
          row.mean_depth = so.depth;
          row.flops_formula = formula[ai];
          row.flops_measured = so.flops_measured;
          rr.rows[pi * n_algos + ai] = std::move(row);
          rr.timing[pi * n_algos + ai] = {a.name, b, s,
                                          std::chrono::duration<double>(t1 - t0).count()};
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };

  const int n_workers = std::clamp<int>(threads, 1, int(points.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return rr;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size() + 1);
  lines.emplace_back(
      "schema,algorithm,block,k_users,snr_db,seed,ewsr,mean_depth,flops_formula,flops_measured");
  for (const auto& r : rows)
    lines.push_back("1," + r.algorithm + ',' + std::to_string(r.block) + ',' +
                    std::to_string(r.k_users) + ',' + fmt(r.snr_db) + ',' +
                    std::to_string(r.seed) + ',' + fmt(r.ewsr) + ',' + fmt(r.mean_depth) + ',' +
                    fmt(r.flops_formula) + ',' + fmt(r.flops_measured));
  write_lines(path, lines);
}

void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size() + 1);
  lines.emplace_back("schema,algorithm,block,seed,wall_time_s");
  for (const auto& r : rows)
    lines.push_back("1," + r.algorithm + ',' + std::to_string(r.block) + ',' +
                    std::to_string(r.seed) + ',' + fmt(r.wall_s));
  write_lines(path, lines);
}

int cmd_run(const std::string& config_path, const CliOptions& cli) {
  try {
    auto kv = cfg::KeyValues::from_file(config_path);
    ExperimentConfig ec = load_experiment(kv);
    if (cli.seed) ec.seed = *cli.seed;
    if (cli.out) ec.out_dir = *cli.out;

    const RunResult rr = run_experiment(ec, cli.threads, cli.instrument);
    std::filesystem::create_directories(ec.out_dir);
    const auto report = (std::filesystem::path(ec.out_dir) / "report.csv").string();
    const auto timing = (std::filesystem::path(ec.out_dir) / "timing.csv").string();
    write_report_csv(report, rr.rows);
    write_timing_csv(timing, rr.timing);
    std::printf("wrote %s (%zu rows)\n", report.c_str(), rr.rows.size());
    std::printf("wrote %s\n", timing.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 1;
  }
}

namespace {

double decile_mean(const std::vector<rl::TraceRow>& trace, bool last) {
  const int n = int(trace.size());
  const int d = std::max(1, n / 10);
  double sum = 0.0;
  int cnt = 0;
  for (int i = 0; i < d; ++i) {
    const auto& row = trace[size_t(last ? n - 1 - i : i)];
    if (std::isfinite(row.reward)) {
      sum += row.reward;
      ++cnt;
    }
  }
  return cnt > 0 ? sum / double(cnt) : 0.0;
}

}  // namespace

int cmd_train(const std::string& config_path, const CliOptions& cli) {
  try {
    auto kv = cfg::KeyValues::from_file(config_path);
    TrainingConfig tc = load_training(kv);
    if (cli.seed) tc.seed = *cli.seed;
    if (cli.out) tc.out_dir = *cli.out;
    std::filesystem::create_directories(tc.out_dir);

    int improved = 0;
    std::vector<std::string> trend_lines;
    trend_lines.emplace_back("schema,seed,first_decile_mean,last_decile_mean,improved");

    for (int s = 0; s < tc.train_seeds; ++s) {
      rl::MimoEnvConfig mec;
      mec.dims = tc.dims;
      mec.sparsity_b = tc.sparsity_b;
      mec.taps = tc.taps;
      mec.var0_scale = tc.var0_scale;
      mec.scenario_seed = scenario_seed(tc.seed, s);
      mec.fresh_scenario = tc.fresh_scenario;
      mec.blocks = tc.blocks;
      mec.sampled = accel::uniform_nodes(tc.dims.n_sub, tc.f_tilde);
      mec.i_max = tc.i_max;
      mec.n_mc = tc.n_mc;
      rl::MimoEnv env(mec);

      nets::NetShape shape;
      shape.in_c = 4;
      shape.h = tc.dims.k_users;
      shape.w = tc.f_tilde;
      shape.conv_c = tc.conv_channels;
      shape.fc = tc.fc_width;
      shape.out = env.action_dim();
      Rng init_rng = Rng(tc.seed).child(0x9017, std::uint64_t(s));
      const rl::PolicyParams p0 =
          rl::make_policy(shape, env.gain_group_map(), tc.i_max, init_rng);

      rl::TrainOptions topts;
      topts.episodes = tc.episodes;
      topts.lr = tc.lr;
      topts.clip = tc.clip;
      topts.baseline_rho = tc.baseline_rho;
      topts.guard_reward = tc.guard_reward;
      topts.guard_grad = tc.guard_grad;
      const rl::TrainResult res =
          rl::train_policy(env, p0, topts, Rng(tc.seed).child(0x7A11, std::uint64_t(s)));

      const auto dir = std::filesystem::path(tc.out_dir);
      const auto ckpt = (dir / ("policy_seed" + std::to_string(s) + ".bin")).string();
      rl::save_policy(ckpt, res.params);

      std::vector<std::string> trace_lines;
      trace_lines.emplace_back("episode,reward,depth,grad_norm");
      for (const auto& row : res.trace)
        trace_lines.push_back(std::to_string(row.episode) + ',' + fmt(row.reward) + ',' +
                              std::to_string(row.depth) + ',' + fmt(row.grad_norm));
      write_lines((dir / ("trace_seed" + std::to_string(s) + ".csv")).string(), trace_lines);

      const double first = decile_mean(res.trace, false);
      const double last = decile_mean(res.trace, true);
      const bool up = last >= first;
      improved += up ? 1 : 0;
      trend_lines.push_back("1," + std::to_string(s) + ',' + fmt(first) + ',' + fmt(last) + ',' +
                            (up ? "1" : "0"));
      std::printf("seed %d: first-decile %.6g, last-decile %.6g, skipped %d, checkpoint %s\n", s,
                  first, last, res.skipped, ckpt.c_str());
    }

    write_lines((std::filesystem::path(tc.out_dir) / "trend.csv").string(), trend_lines);
    std::printf("reward trend improved on %d/%d seeds\n", improved, tc.train_seeds);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "train failed: %s\n", e.what());
    return 1;
  }
}

int cmd_flops(const std::string& config_path, const CliOptions& cli) {
  try {
    auto kv = cfg::KeyValues::from_file(config_path);
    const SystemDims dims = load_dims(kv);
    accel::FlopConstants fc;
    fc.b = int(kv.get_int("flops.b", fc.b));
    fc.q = int(kv.get_int("flops.q", fc.q));
    fc.f_tilde = int(kv.get_int("flops.f_tilde", fc.f_tilde));
    fc.iters = int(kv.get_int("flops.iters", fc.iters));
    fc.d = int(kv.get_int("flops.d", fc.d));
    fc.c = int(kv.get_int("flops.c", fc.c));
    fc.h = int(kv.get_int("flops.h", fc.h));
    const double reference = kv.get_double("flops.reference_swmmse", 2.3e7);
    const int sparsity_b = int(kv.get_int("sparsity_b", 4));
    const int taps = int(kv.get_int("taps", 3));
    const double var0_scale = kv.get_double("var0_scale", 0.0);
    std::uint64_t seed = kv.get_u64("seed", 1);
    std::string out_dir = kv.get_string("out_dir", "out");
    if (cli.seed) seed = *cli.seed;
    if (cli.out) out_dir = *cli.out;
    kv.reject_unknown();

    std::vector<std::string> lines;
    lines.emplace_back("schema,algorithm,term,flops");
    double sw_total = 0.0, po_total = 0.0, rl_total = 0.0;
    for (const std::string algo : {"swmmse", "po_wmmse", "rlddu"}) {
      const auto model = accel::flop_estimate(dims, algo, fc);
      for (const auto& [term, value] : model.terms)
        lines.push_back("1," + algo + ',' + term + ',' + fmt(value));
      lines.push_back("1," + algo + ",total," + fmt(model.total));
      if (algo == "swmmse") sw_total = model.total;
      if (algo == "po_wmmse") po_total = model.total;
      if (algo == "rlddu") rl_total = model.total;
    }

    if (cli.instrument) {
      const auto stats = channel::evolve_stats(
          channel::make_scenario(dims, sparsity_b, seed, taps, var0_scale),
          std::min(1, dims.n_blocks));
      const auto sampled = accel::uniform_nodes(dims.n_sub, std::min(fc.f_tilde, dims.n_sub));
      const PrecoderSet x0 = channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
      const auto comps = du::zero_compensation(fc.iters, dims.k_users, int(sampled.size()),
                                               dims.m_r);
      for (const bool dense : {false, true}) {
        du::DuOptions opts;
        opts.dense_inverse = dense;
        accel::FlopCounter counter;
        counter.enabled = true;
        (void)du::run_du_network(stats, dims, x0, comps, sampled, opts, nullptr, &counter);
        const std::string tag = dense ? "measured_dense" : "measured_pruned";
        for (const auto& [op, count] : counter.by_op)
          lines.push_back("1," + tag + ',' + op + ',' + fmt(double(count)));
        lines.push_back("1," + tag + ",total," + fmt(counter.total()));
      }
    }

    std::filesystem::create_directories(out_dir);
    const auto path = (std::filesystem::path(out_dir) / "flops.csv").string();
    write_lines(path, lines);
    std::printf("swmmse total %s, reference %s, ratio %s\n", fmt(sw_total).c_str(),
                fmt(reference).c_str(), fmt(sw_total / reference).c_str());
    std::printf("totals: rlddu %s, po_wmmse %s, swmmse %s\n", fmt(rl_total).c_str(),
                fmt(po_total).c_str(), fmt(sw_total).c_str());
    std::printf("wrote %s\n", path.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "flops failed: %s\n", e.what());
    return 1;
  }
}

namespace {

bool report_check(const char* name, bool ok) {
  std::printf("selftest %s: %s\n", name, ok ? "PASS" : "FAIL");
  return ok;
}

bool selftest_taylor() {
  const cmat eye = cmat::Identity(3, 3);
  const cmat inv_eye = du::taylor_diag_inverse(eye, cmat::Zero(3, 3));
  if ((inv_eye - eye).norm() > 1e-12) return false;
  cmat d = cmat::Zero(3, 3);
  d(0, 0) = 2.0;
  d(1, 1) = 0.5;
  d(2, 2) = 4.0;
  const cmat inv_d = du::taylor_diag_inverse(d, cmat::Zero(3, 3));
  return (inv_d - cmat(d.inverse())).norm() <= 1e-12;
}

bool selftest_interpolation() {
  const std::vector<double> nodes = {0.0, 4.0, 9.0};
  std::vector<cmat> vals;
  const auto poly = [](double x) {
    cmat m(2, 2);
    m(0, 0) = cplx(1.0 + 2.0 * x - 0.5 * x * x, x);
    m(0, 1) = cplx(x * x, 1.0 - x);
    m(1, 0) = cplx(-x, 3.0 * x * x);
    m(1, 1) = cplx(0.25 * x * x - x, 2.0);
    return m;
  };
  for (double n : nodes) vals.push_back(poly(n));
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const double x = 9.0 * rng.uniform();
    const cmat got = accel::lagrange_interp3(nodes[0], vals[0], nodes[1], vals[1], nodes[2],
                                             vals[2], x);
    if ((got - poly(x)).norm() > 1e-12) return false;
  }
  return true;
}

bool selftest_moments() {
  Rng rng(7);
  const int m_r = 2, m_t = 6;
  cmat mean(m_r, m_t);
  rmat var(m_r, m_t);
  for (int r = 0; r < m_r; ++r)
    for (int c = 0; c < m_t; ++c) {
      mean(r, c) = rng.cgauss();
      var(r, c) = 0.3 + 0.5 * rng.uniform();
    }
  cmat m = cmat::Identity(m_r, m_r) * 0.7;
  m(0, 1) = cplx(0.2, 0.1);
  m(1, 0) = std::conj(m(0, 1));
  const cmat closed = du::expected_gram(mean, var, m);
  cmat mc = cmat::Zero(m_t, m_t);
  const int n = 20000;
  for (int t = 0; t < n; ++t) {
    cmat h(m_r, m_t);
    for (int r = 0; r < m_r; ++r)
      for (int c = 0; c < m_t; ++c) h(r, c) = mean(r, c) + std::sqrt(var(r, c)) * rng.cgauss();
    mc += h.adjoint() * m * h;
  }
  mc /= double(n);
  return (closed - mc).norm() / closed.norm() <= 0.05;
}

bool selftest_power() {
  const SystemDims dims = SystemDims::make(8, 2, 2, 12, 4, 1.0, 0.1);
  const auto stats = channel::make_scenario(dims, 3, 11);
  swmmse::SolveOptions so;
  so.iters = 3;
  so.trace_objective = true;
  const auto res = swmmse::swmmse_solve(stats, dims, so, Rng(12));
  if (std::abs(res.v.power - dims.p_max) > 1e-9) return false;
  for (size_t i = 1; i < res.objective.size(); ++i)
    if (res.objective[i] > res.objective[i - 1] + 1e-9) return false;
  return true;
}

bool selftest_reward_identity() {
  const SystemDims dims = SystemDims::make(8, 2, 2, 12, 4, 1.0, 0.1);
  const auto stats = channel::evolve_stats(channel::make_scenario(dims, 3, 21), 2);
  const auto sampled = accel::uniform_nodes(12, 3);
  const int i_max = 2;
  rl::ActionLayout lay{i_max, dims.k_users, int(sampled.size()), dims.m_r};
  rvec beta = rvec::Zero(i_max);
  beta(i_max - 1) = 1.0;
  const rvec action = lay.encode(
      du::zero_compensation(i_max, dims.k_users, int(sampled.size()), dims.m_r), beta);
  rl::RewardOptions opts;
  opts.i_max = i_max;
  opts.n_mc = 16;
  return rl::reward(stats, dims, action, lay, sampled, opts, Rng(22)) == 0.0;
}

}  // namespace

int cmd_selftest(const CliOptions&) {
  bool ok = true;
  try {
    ok &= report_check("taylor-diagonal-inverse", selftest_taylor());
    ok &= report_check("interpolation-exactness", selftest_interpolation());
    ok &= report_check("closed-form-moments", selftest_moments());
    ok &= report_check("power-feasibility-and-descent", selftest_power());
    ok &= report_check("reward-identity", selftest_reward_identity());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "selftest crashed: %s\n", e.what());
    return 1;
  }
  std::printf("selftest: %s\n", ok ? "ALL PASS" : "FAILURES");
  return ok ? 0 : 1;
}

}  // namespace rlddu::harness
