#include <iostream>

#include <CLI11.hpp>

#include "orthoe/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"OrthogonalE knowledge-graph embedding"};
  app.require_subcommand(1);
  orthoe::CommandOptions o;
  std::uint64_t seed = 0;

  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "worker threads (1 is bit-deterministic)")
        ->check(CLI::PositiveNumber);
  };

  auto* prepare = app.add_subcommand("prepare", "parse train/valid/test TSVs into a cache");
  prepare->add_option("--data", o.data, "directory with train.txt, valid.txt, test.txt")
      ->required();
  prepare->add_option("--out", o.out, "cache file or directory")->required();

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", o.config, "key=value config file")->required();
  train->add_option("--data", o.data, "dataset directory or cache file")->required();
  train->add_option("--out", o.out, "output directory")->required();
  auto* seed_opt = train->add_option("--seed", seed, "override the config seed");
  add_threads(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint)->required();
  eval->add_option("--data", o.data, "dataset directory or cache file")->required();
  eval->add_option("--split", o.split)->check(CLI::IsMember({"valid", "test"}));
  eval->add_flag("--both-sides", o.both_sides, "also rank heads");
  add_threads(eval);

  auto* analyze = app.add_subcommand("analyze", "relation pattern residuals and histograms");
  analyze->add_option("--checkpoint", o.checkpoint)->required();
  analyze->add_option("--kind", o.kind,
                      "symmetry | antisymmetry | inversion | composition | commutator-gap")
      ->required();
  analyze->add_option("--out", o.out, "report directory (default .)");
  analyze->add_option("--bins", o.bins)->check(CLI::PositiveNumber);
  analyze->add_option("relations", o.relations, "relation names")->required();

  auto* pcount = app.add_subcommand("param-count", "parameter counts for a config");
  pcount->add_option("--config", o.config)->required();
  pcount->add_option("--data", o.data, "optional dataset for totals");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) o.seed = seed;

  try {
    if (*prepare) return orthoe::cmd_prepare(o, std::cout);
    if (*train) return orthoe::cmd_train(o, std::cout);
    if (*eval) return orthoe::cmd_eval(o, std::cout);
    if (*analyze) return orthoe::cmd_analyze(o, std::cout);
    if (*pcount) return orthoe::cmd_param_count(o, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return orthoe::exit_code_for(e);
  }
  return 1;
}
