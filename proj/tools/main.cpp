#include <cstdio>
#include <exception>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"
#include "json_config.hpp"
#include "smartposer/error.hpp"

using namespace smartposer;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

void add_train_flags(CLI::App* cmd, train::TrainConfig& c) {
  cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Windows per optimizer step")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Initialization and shuffling seed")->capture_default_str();
  cmd->add_option("--validation-subjects", c.validation_subjects,
                  "Subjects held out of training for best-epoch selection")
      ->capture_default_str();
  cmd->add_option("--grad-clip", c.grad_clip_norm, "Global gradient norm clip")->capture_default_str();
  cmd->add_flag("--detach-corrector", c.detach_corrector, "Stop estimator gradients at the corrected UWB channel");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arm pose estimation from a smartwatch, a phone and UWB ranging"};
  app.config_formatter(std::make_shared<cli::JsonConfig>([&app] {
    const auto subs = app.get_subcommands();
    return subs.empty() ? std::string() : subs.front()->get_name();
  }));
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file with option values for the subcommand; flags override it");
  app.fallthrough();
  app.require_subcommand(1, 1);

  cli::SimulateOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus");
  simulate->add_option("--subjects", sim_opts.subjects, "Number of subjects")->capture_default_str();
  simulate->add_option("--minutes", sim_opts.minutes, "Minutes per subject")->capture_default_str();
  simulate->add_option("--seed", sim_opts.seed, "Master seed")->capture_default_str();
  simulate->add_option("--out", sim_opts.out, "Output directory")->required();
  simulate->add_option("--noise", sim_opts.noise, "Noise override key=value (repeatable)");

  cli::TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the corrector and estimator");
  train_cmd->add_option("--data", train_opts.data, "Corpus directory")->required();
  train_cmd->add_option("--out", train_opts.out, "Output weight file")->required();
  train_cmd->add_option("--loss-csv", train_opts.loss_csv, "Loss history CSV (default <out>.loss.csv)");
  train_cmd->add_flag("--ablate-uwb", train_opts.config.ablate_uwb, "IMU-only estimator with 24 inputs");
  add_train_flags(train_cmd, train_opts.config);

  cli::InferOptions infer_opts;
  auto* infer = app.add_subcommand("infer", "Replay a session through the streaming pipeline");
  infer->add_option("--weights", infer_opts.weights, "Weight file")->required();
  infer->add_option("--session", infer_opts.session, "Session CSV, or - for standard input")->required();
  infer->add_option("--meta", infer_opts.meta, "Session metadata JSON (default: the CSV's sidecar)");
  infer->add_option("--out", infer_opts.out, "Output CSV, or - for standard output")->capture_default_str();
  infer->add_flag("--stream", infer_opts.stream, "Process rows as they arrive");

  cli::EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate weights, or run cross-validation");
  eval_cmd->add_option("--weights", eval_opts.weights, "Weight file (not used with --loso/--ablation)");
  eval_cmd->add_option("--data", eval_opts.data, "Corpus directory")->required();
  eval_cmd->add_option("--out", eval_opts.out, "Output directory")->capture_default_str();
  eval_cmd->add_option("--stride", eval_opts.stride, "Frames between evaluated windows")->capture_default_str();
  eval_cmd->add_flag("--loso", eval_opts.loso, "Leave-one-subject-out cross-validation");
  eval_cmd->add_flag("--ablation", eval_opts.ablation, "UWB+IMU versus IMU-only under identical folds");
  eval_cmd->add_flag("--baselines", eval_opts.baselines, "Also score untrained weights and the mean pose");
  add_train_flags(eval_cmd, eval_opts.config);

  cli::PlotOptions plot_opts;
  auto* plot = app.add_subcommand("plot", "Render an SVG from a report file");
  plot->add_option("--report", plot_opts.report, "Report JSON written by eval")->required();
  plot->add_option("--kind", plot_opts.kind, "cdf, heatmap or uwb-trace")
      ->required()
      ->check(CLI::IsMember({"cdf", "heatmap", "uwb-trace"}));
  plot->add_option("--out", plot_opts.out, "Output SVG, or - for standard output")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (simulate->parsed()) return cli::run_simulate(sim_opts);
    if (train_cmd->parsed()) return cli::run_train(train_opts);
    if (infer->parsed()) return cli::run_infer(infer_opts);
    if (eval_cmd->parsed()) return cli::run_eval(eval_opts);
    if (plot->parsed()) return cli::run_plot(plot_opts);
  } catch (const cli::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
