#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "smartposer/train.hpp"

namespace smartposer::cli {

// Bad flag values or unusable paths detected before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulateOptions {
  int subjects = 10;
  double minutes = 20.0;
  std::uint64_t seed = 1;
  std::string out;
  std::vector<std::string> noise;  // key=value
};

struct TrainOptions {
  std::string data;
  std::string out;
  std::string loss_csv;  // default: <out stem>.loss.csv
  train::TrainConfig config;
};

struct InferOptions {
  std::string weights;
  std::string session;  // "-" reads standard input
  std::string meta;     // sidecar; default derived from the session path
  std::string out = "-";
  bool stream = false;
};

struct EvalOptions {
  std::string weights;
  std::string data;
  std::string out = "eval_out";
  bool loso = false;
  bool ablation = false;
  bool baselines = false;
  std::size_t stride = 1;
  train::TrainConfig config;
};

struct PlotOptions {
  std::string report;
  std::string kind;
  std::string out = "-";
};

int run_simulate(const SimulateOptions& o);
int run_train(const TrainOptions& o);
int run_infer(const InferOptions& o);
int run_eval(const EvalOptions& o);
int run_plot(const PlotOptions& o);

// 3e-4 style rendering used when echoing configuration.
std::string short_number(double v);

}  // namespace smartposer::cli
