#include <cstdint>
#include <string>

#include "CLI11.hpp"

#include "lpld/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Source-free domain adaptive detection on a synthetic benchmark"};
  app.require_subcommand(1);

  lpld::CliOptions opts;
  uint64_t seed_value = 0;
  bool no_hpl = false, no_lpl = false, no_aw = false;
  std::string loss_kind;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config, "Run config JSON (defaults apply when omitted)");
    cmd->add_option("--out", opts.out, "Output directory (overrides config out_dir)");
    cmd->add_option("--seed", seed_value, "Seed override")->each([&](const std::string&) {
      opts.seed = seed_value;
    });
  };
  auto add_manifest = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", opts.manifest, "Dataset manifest path");
  };
  auto add_checkpoint = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", opts.checkpoint, "Checkpoint path")->required();
  };

  CLI::App* gen = app.add_subcommand("gen", "Write the dataset manifest");
  add_common(gen);

  CLI::App* pretrain = app.add_subcommand("pretrain", "Train the source model on source scenes");
  add_common(pretrain);
  add_manifest(pretrain);

  CLI::App* adapt = app.add_subcommand("adapt", "Adapt a source checkpoint to the target domain");
  add_common(adapt);
  add_manifest(adapt);
  add_checkpoint(adapt);
  adapt->add_flag("--no-hpl", no_hpl, "Disable the mean-teacher HPL loss");
  adapt->add_flag("--no-lpl", no_lpl, "Disable low-confidence distillation");
  adapt->add_flag("--no-adaptive-weights", no_aw, "Disable cosine-distance weighting");
  adapt->add_option("--lpl-loss", loss_kind, "Distillation variant: kl, ce, ce_reg");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  add_common(eval);
  add_manifest(eval);
  add_checkpoint(eval);
  eval->add_option("--split", opts.split, "source, target_train, or target_eval");

  CLI::App* mine = app.add_subcommand("mine", "Dump HPL/LPL pseudo labels for one scene");
  add_common(mine);
  add_manifest(mine);
  add_checkpoint(mine);
  mine->add_option("--scene-id", opts.scene_id, "Scene id from the manifest")->required();
  mine->add_option("--dump", opts.dump, "Dump file path (default <out_dir>/mine_<id>.json)");

  CLI::App* report = app.add_subcommand("report", "Emit plot-ready CSVs for a finished run");
  add_common(report);
  add_manifest(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (no_hpl) opts.use_hpl = false;
  if (no_lpl) opts.use_lpl = false;
  if (no_aw) opts.use_adaptive_weights = false;
  if (!loss_kind.empty()) opts.lpl_loss_kind = loss_kind;

  if (gen->parsed()) return lpld::cmd_gen(opts);
  if (pretrain->parsed()) return lpld::cmd_pretrain(opts);
  if (adapt->parsed()) return lpld::cmd_adapt(opts);
  if (eval->parsed()) return lpld::cmd_eval(opts);
  if (mine->parsed()) return lpld::cmd_mine(opts);
  if (report->parsed()) return lpld::cmd_report(opts);
  return 2;
}
