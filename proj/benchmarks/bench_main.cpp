#include <benchmark/benchmark.h>

#include "smartposer/nn.hpp"
#include "smartposer/pipeline.hpp"
#include "smartposer/session_features.hpp"
#include "smartposer/simulator.hpp"
#include "smartposer/train.hpp"

using namespace smartposer;

namespace {

const pipeline::SessionFeatures& session() {
  static const pipeline::SessionFeatures s =
      pipeline::session_features(sim::generate_session(sim::make_subject(0, 5), {}, 20.0, 6));
  return s;
}

void BM_InferWindow(benchmark::State& state) {
  const nn::ModelWeights model = nn::model_cast<float>(train::init_model(nn::ModelSpec{}, 1));
  const MatrixF window = session().features.topRows(125).cast<float>();
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::infer_window(model, window));
  }
}
BENCHMARK(BM_InferWindow)->Unit(benchmark::kMillisecond);

void BM_InferWindowDouble(benchmark::State& state) {
  const nn::Model<double> model = train::init_model(nn::ModelSpec{}, 1);
  const MatrixD window = session().features.topRows(125);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::infer_window(model, window));
  }
}
BENCHMARK(BM_InferWindowDouble)->Unit(benchmark::kMillisecond);

// One optimizer step at batch size 1: forward, BPTT and Adam.
void BM_TrainStep(benchmark::State& state) {
  const std::vector<pipeline::SessionFeatures> corpus{session()};
  const auto windows = train::make_training_windows(corpus);
  nn::Model<double> model = train::init_model(nn::ModelSpec{}, 2);
  train::Gradients grads = nn::make_model<double>(model.spec);
  auto adam = train::make_adam_state(model);
  const train::TrainConfig cfg;
  std::size_t k = 0;
  for (auto _ : state) {
    train::zero_gradients(grads);
    train::bptt_backward(model, windows[k++ % windows.size()], grads);
    const double norm = train::gradient_norm(grads);
    if (norm > cfg.grad_clip_norm) train::scale_gradients(grads, cfg.grad_clip_norm / norm);
    train::adam_step(model, grads, adam, cfg);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_FuseFrame(benchmark::State& state) {
  const auto rec = sim::generate_session(sim::make_subject(1, 5), {}, 4.0, 7);
  const calib::CalibrationState cal = calib::calibrate(rec.calibration);
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        pipeline::fuse_frame(rec.frames[k++ % rec.frames.size()], cal, rec.subject.arm_model.arm_span));
  }
}
BENCHMARK(BM_FuseFrame);

}  // namespace

BENCHMARK_MAIN();
