// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <cstdint>
#include <string>

#include "rlddu/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"robust wideband MU-MIMO precoding simulator"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed_val = 0;
  std::string out_val;
  int threads = 1;
  bool instrument = false;

  auto* run = app.add_subcommand("run", "evaluate algorithms over a (seed x block) grid");
  auto* train = app.add_subcommand("train", "train the compensation policy");
  auto* flops = app.add_subcommand("flops", "complexity formulas and measured counters");
  auto* selftest = app.add_subcommand("selftest", "built-in numerical checks");

  for (CLI::App* sub : {run, train, flops, selftest}) {
    auto* oc = sub->add_option("--config", config, "key=value config file");
    if (sub != selftest) oc->required();
    sub->add_option("--seed", seed_val, "override the config seed");
    sub->add_option("--out", out_val, "override the output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--instrument-flops", instrument, "record measured multiply-accumulates");
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  rlddu::harness::CliOptions cli;
  cli.threads = threads;
  cli.instrument = instrument;
  if (sub->count("--seed") > 0) cli.seed = seed_val;
  if (sub->count("--out") > 0) cli.out = out_val;

  if (sub == run) return rlddu::harness::cmd_run(config, cli);
  if (sub == train) return rlddu::harness::cmd_train(config, cli);
  if (sub == flops) return rlddu::harness::cmd_flops(config, cli);
  return rlddu::harness::cmd_selftest(cli);
}
