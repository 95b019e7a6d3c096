#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "timedrl/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string precision;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, Common& c, bool wants_checkpoint) {
  cmd->add_option("--config", c.config, "Run configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory (overrides run.out)");
  cmd->add_option("--seed", c.seed, "Root seed (overrides run.seed)");
  cmd->add_option("--precision", c.precision, "f32 or f64 (overrides run.precision)")
      ->check(CLI::IsMember({"f32", "f64"}));
  if (wants_checkpoint) cmd->add_option("--checkpoint", c.checkpoint, "Checkpoint from a pretrain run");
}

timedrl::RunConfig resolve(const Common& c) {
  timedrl::RunConfig cfg = timedrl::load_config(c.config);
  if (!c.out.empty()) cfg.out = c.out;
  if (c.seed) cfg.seed = *c.seed;
  if (!c.precision.empty()) cfg.precision = c.precision;
  return cfg;
}

std::optional<std::filesystem::path> checkpoint_of(const Common& c) {
  if (c.checkpoint.empty()) return std::nullopt;
  return c.checkpoint;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-level self-supervised time-series representation learning"};
  app.set_version_flag("--version", timedrl::kVersion);
  app.require_subcommand(1);

  Common pre, ev, ft, ab, ex, gen;
  std::optional<std::size_t> stop_after;
  std::string resume;
  bool with_timestamps = false;

  auto* c_pre = app.add_subcommand("pretrain", "Pretrain encoder and heads; writes checkpoint and loss curves");
  add_common(c_pre, pre, false);
  c_pre->add_option("--resume", resume, "Continue from a checkpoint written by an interrupted run");
  c_pre->add_option("--stop-after", stop_after, "Stop once this many epochs have completed");

  auto* c_ev = app.add_subcommand("eval", "Linear probe on the frozen encoder");
  add_common(c_ev, ev, true);

  auto* c_ft = app.add_subcommand("finetune", "Fine-tune over the label-fraction grid");
  add_common(c_ft, ft, true);

  auto* c_ab = app.add_subcommand("ablate", "Run one ablation axis");
  add_common(c_ab, ab, false);

  auto* c_ex = app.add_subcommand("export-embeddings", "Write eval-mode embeddings and anisotropy summary");
  add_common(c_ex, ex, true);
  c_ex->add_flag("--with-timestamps", with_timestamps, "Also write flattened timestamp-level embeddings");

  auto* c_gen = app.add_subcommand("gen-data", "Write the configured synthetic dataset as CSV");
  add_common(c_gen, gen, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_pre) {
      const auto cfg = resolve(pre);
      timedrl::PretrainOptions opts;
      if (!resume.empty()) opts.resume = resume;
      opts.stop_after = stop_after;
      timedrl::cmd_pretrain(cfg, cfg.out, opts);
    } else if (*c_ev) {
      const auto cfg = resolve(ev);
      timedrl::cmd_eval(cfg, checkpoint_of(ev), cfg.out);
    } else if (*c_ft) {
      const auto cfg = resolve(ft);
      timedrl::cmd_finetune(cfg, checkpoint_of(ft), cfg.out);
    } else if (*c_ab) {
      const auto cfg = resolve(ab);
      timedrl::cmd_ablate(cfg, cfg.out);
    } else if (*c_ex) {
      const auto cfg = resolve(ex);
      timedrl::cmd_export_embeddings(cfg, checkpoint_of(ex), cfg.out, with_timestamps);
    } else if (*c_gen) {
      const auto cfg = resolve(gen);
      timedrl::cmd_gen_data(cfg, cfg.out);
    }
  } catch (const timedrl::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(timedrl::to_string(e.code())).c_str(), e.what());
    return timedrl::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
