#include "mmbattn/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"mmbattn: CTR models with max/mean/bit-wise attention"};
  app.require_subcommand(1);

  mmb::cli::Options opts;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config, "Run configuration file");
    if (needs_config) c->required();
    sub->add_option("--seed", opts.seeds, "Seed (repeatable); replaces run.seeds");
    sub->add_option("--out", opts.out, "Output directory (default: run.out)");
    sub->add_option("--override", opts.overrides, "section.key=value (repeatable)");
    sub->add_flag("--force", opts.force, "Load checkpoints despite a config digest mismatch");
  };

  auto* train = app.add_subcommand("train", "Train one model per seed");
  common(train, true);

  std::filesystem::path checkpoint;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  common(evaluate, true);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  auto* ablate = app.add_subcommand("ablate", "Run the six attention component combinations");
  common(ablate, true);

  std::string axis;
  std::vector<std::int64_t> values;
  auto* sweep = app.add_subcommand("sweep", "One run per value of reduction_ratio or embedding_dim");
  common(sweep, true);
  sweep->add_option("--axis", axis, "reduction_ratio | embedding_dim")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');

  std::string fault;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  common(gradcheck, false);
  gradcheck->add_option("--inject-fault", fault, "OP:SCALE, scales one op's backward (harness self-test)");

  std::filesystem::path spec;
  std::filesystem::path synth_out;
  auto* synth = app.add_subcommand("synth", "Write a planted-importance synthetic dataset");
  synth->add_option("--config,--spec", spec, "Synthetic spec file")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* inspect = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's manifest and config");
  inspect->add_option("checkpoint", checkpoint, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  using namespace mmb::cli;
  if (train->parsed()) return cmd_train(opts, std::cout, std::cerr);
  if (evaluate->parsed()) return cmd_evaluate(opts, checkpoint, std::cout, std::cerr);
  if (ablate->parsed()) return cmd_ablate(opts, std::cout, std::cerr);
  if (sweep->parsed()) return cmd_sweep(opts, axis, values, std::cout, std::cerr);
  if (gradcheck->parsed()) {
    std::optional<std::pair<std::string, double>> injected;
    if (!fault.empty()) {
      const auto colon = fault.find(':');
      if (colon == std::string::npos) {
        std::cerr << "--inject-fault expects OP:SCALE\n";
        return 2;
      }
      injected = std::make_pair(fault.substr(0, colon), std::stod(fault.substr(colon + 1)));
    }
    return cmd_gradcheck(opts, injected, std::cout, std::cerr);
  }
  if (synth->parsed()) return cmd_synth(spec, synth_out, std::cout, std::cerr);
  if (inspect->parsed()) return cmd_inspect_checkpoint(checkpoint, std::cout, std::cerr);
  return 1;
}
