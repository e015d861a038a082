#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "smartposer/error.hpp"
#include "smartposer/nn.hpp"
#include "smartposer/random.hpp"

using namespace smartposer;
using namespace smartposer::nn;

namespace {

template <typename T>
void randomize(Model<T>& m, Rng& rng, double scale) {
  for (auto& nt : named_tensors(m))
    for (auto& v : nt.tensor->data()) v = static_cast<T>(rng.uniform(-scale, scale));
}

MatrixD random_seq(Rng& rng, std::size_t rows, std::size_t cols) {
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Plain-loop LSTM direction: z = Wi x + Wh h + b, gates [i f g o].
std::vector<std::vector<double>> naive_direction(const std::vector<std::vector<double>>& seq,
                                                 const LstmDirection<double>& w, bool reverse) {
  const std::size_t H = w.hidden(), D = w.input_dim(), T = seq.size();
  std::vector<std::vector<double>> out(T, std::vector<double>(H));
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double acc = w.bias[r];
      for (std::size_t d = 0; d < D; ++d) acc += w.w_input[r * D + d] * seq[t][d];
      for (std::size_t k = 0; k < H; ++k) acc += w.w_hidden[r * H + k] * h[k];
      z[r] = acc;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double i = oracle::sigmoid(z[k]);
      const double f = oracle::sigmoid(z[H + k]);
      const double g = std::tanh(z[2 * H + k]);
      const double o = oracle::sigmoid(z[3 * H + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
    out[t] = h;
  }
  return out;
}

std::vector<std::vector<double>> naive_network(const Network<double>& net, const MatrixD& x) {
  std::vector<std::vector<double>> seq(static_cast<std::size_t>(x.rows()));
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (Eigen::Index d = 0; d < x.cols(); ++d) seq[t].push_back(x(static_cast<Eigen::Index>(t), d));
  for (const auto& layer : net.layers) {
    const auto f = naive_direction(seq, layer.forward, false);
    const auto b = naive_direction(seq, layer.backward, true);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      seq[t] = f[t];
      seq[t].insert(seq[t].end(), b[t].begin(), b[t].end());
    }
  }
  const std::size_t K = net.head_weight.dim(0), W = net.head_weight.dim(1);
  std::vector<std::vector<double>> out(seq.size(), std::vector<double>(K));
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (std::size_t k = 0; k < K; ++k) {
      double acc = net.head_bias[k];
      for (std::size_t j = 0; j < W; ++j) acc += net.head_weight[k * W + j] * seq[t][j];
      out[t][k] = acc;
    }
  return out;
}

LstmDirection<double> scalar_direction(std::vector<double> wi, std::vector<double> wh, std::vector<double> b) {
  return {TensorD({4, 1}, std::move(wi)), TensorD({4, 1}, std::move(wh)), TensorD({4}, std::move(b))};
}

}  // namespace

TEST_CASE("standard parameter counts") {
  const Model<float> m = make_model<float>(ModelSpec{});
  // Per direction 4H(D + H + 1); heads K(2H + 1).
  const std::size_t corrector = 2 * 32 * (25 + 8 + 1) + 2 * 32 * (16 + 8 + 1) + (16 + 1);
  const std::size_t estimator = 2 * 128 * (25 + 32 + 1) + 2 * 128 * (64 + 32 + 1) + 9 * (64 + 1);
  CHECK(parameter_count(m.corrector) == corrector);
  CHECK(parameter_count(m.estimator) == estimator);
  CHECK(parameter_count(m) == corrector + estimator);
  CHECK(parameter_count(m) == 44058);
  CHECK(parameter_count(m) >= 40000);
  CHECK(parameter_count(m) <= 50000);

  ModelSpec imu;
  imu.use_uwb = false;
  const Model<float> a = make_model<float>(imu);
  CHECK(a.corrector.empty());
  CHECK(parameter_count(a) == 2 * 128 * (24 + 32 + 1) + 2 * 128 * (64 + 32 + 1) + 9 * (64 + 1));
}

TEST_CASE("spec validation") {
  ModelSpec s;
  CHECK_NOTHROW(s.validate());
  CHECK(s.output_frame_index() == 119);
  s.output_frame_lag = 125;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = ModelSpec{};
  s.estimator_hidden = 0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
}

TEST_CASE("tensor names are unique and the model validates") {
  Model<float> m = make_model<float>(ModelSpec{});
  std::set<std::string> names;
  for (const auto& nt : named_tensors(m)) CHECK(names.insert(nt.name).second);
  CHECK(names.count("estimator.l1.bwd.w_hidden") == 1);
  CHECK(names.count("corrector.head.bias") == 1);
  CHECK(names.size() == 2 * (2 * 2 * 3 + 2));
  CHECK_NOTHROW(validate_model(m));

  m.estimator.head_bias = Tensor({8});
  CHECK_THROWS_AS(validate_model(m), InvalidInput);
  m = make_model<float>(ModelSpec{});
  m.corrector.layers[0].forward.bias[3] = std::nanf("");
  CHECK_THROWS_AS(validate_model(m), InvalidInput);
}

TEST_CASE("lstm_cell zero weights and states") {
  const ModelSpec spec;
  const Model<double> m = make_model<double>(spec);
  const auto& w = m.estimator.layers[0].forward;
  std::vector<double> x(25, 0.7), h(32, 0.0), c(32, 0.0);
  const CellState<double> s = lstm_cell<double>(x, h, c, w);
  CHECK(s.h.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm_cell scalar case matches hand evaluation") {
  const double wi[4] = {0.5, -0.3, 0.8, 0.1};
  const double wh[4] = {0.2, 0.4, -0.6, 0.9};
  const double b[4] = {0.05, 1.0, -0.1, 0.2};
  const auto w = scalar_direction({wi[0], wi[1], wi[2], wi[3]}, {wh[0], wh[1], wh[2], wh[3]}, {b[0], b[1], b[2], b[3]});
  const double x = 1.3, h = -0.4, c = 0.25;
  const double i = oracle::sigmoid(wi[0] * x + wh[0] * h + b[0]);
  const double f = oracle::sigmoid(wi[1] * x + wh[1] * h + b[1]);
  const double g = std::tanh(wi[2] * x + wh[2] * h + b[2]);
  const double o = oracle::sigmoid(wi[3] * x + wh[3] * h + b[3]);
  const double c_next = f * c + i * g;
  const double h_next = o * std::tanh(c_next);
  const std::vector<double> xs{x}, hs{h}, cs{c};
  const CellState<double> s = lstm_cell<double>(xs, hs, cs, w);
  CHECK(s.c(0) == doctest::Approx(c_next).epsilon(1e-14));
  CHECK(s.h(0) == doctest::Approx(h_next).epsilon(1e-14));
  // Values worked out independently for these weights.
  CHECK(s.c(0) == doctest::Approx(0.6906841940121107).epsilon(1e-12));
  CHECK(s.h(0) == doctest::Approx(0.29472285583922253).epsilon(1e-12));
}

TEST_CASE("lstm_cell shape errors and bounded output") {
  const Model<double> m = make_model<double>(ModelSpec{});
  const auto& w = m.corrector.layers[0].forward;
  std::vector<double> x(24), h(8), c(8);
  CHECK_THROWS_AS(lstm_cell<double>(x, h, c, w), InvalidInput);
  x.resize(25);
  h.resize(7);
  CHECK_THROWS_AS(lstm_cell<double>(x, h, c, w), InvalidInput);

  Model<double> big = make_model<double>(ModelSpec{});
  Rng rng(8);
  randomize(big, rng, 5.0);
  std::vector<double> hx(8, 0.0), cx(8, 0.0), xx(25);
  for (int step = 0; step < 200; ++step) {
    for (auto& v : xx) v = rng.normal(0, 10);
    const auto s = lstm_cell<double>(xx, hx, cx, big.corrector.layers[0].forward);
    CHECK(s.h.cwiseAbs().maxCoeff() < 1.0);
    CHECK(s.h.allFinite());
    hx.assign(s.h.data(), s.h.data() + 8);
    cx.assign(s.c.data(), s.c.data() + 8);
  }
}

TEST_CASE("network forward matches the naive loop oracle") {
  Rng rng(9);
  Model<double> m = make_model<double>(ModelSpec{});
  randomize(m, rng, 0.4);
  const MatrixD x = random_seq(rng, 30, 25);
  for (const Network<double>* net : {&m.corrector, &m.estimator}) {
    const MatrixD y = network_forward(*net, x);
    const auto expect = naive_network(*net, x);
    double worst = 0.0;
    for (Eigen::Index t = 0; t < y.rows(); ++t)
      for (Eigen::Index k = 0; k < y.cols(); ++k)
        worst = std::max(worst, std::abs(y(t, k) - expect[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("single-step sequence concatenates two independent cells") {
  Rng rng(10);
  Model<double> m = make_model<double>(ModelSpec{});
  randomize(m, rng, 0.5);
  const MatrixD x = random_seq(rng, 1, 25);
  const auto& layers = m.corrector.layers;
  const MatrixD y = bilstm_forward<double>(x, std::span<const BiLstmLayer<double>>(layers.data(), 1));
  std::vector<double> xv(x.data(), x.data() + 25), zero(8, 0.0);
  const auto f = lstm_cell<double>(xv, zero, zero, layers[0].forward);
  const auto b = lstm_cell<double>(xv, zero, zero, layers[0].backward);
  REQUIRE(y.cols() == 16);
  for (int k = 0; k < 8; ++k) {
    CHECK(y(0, k) == doctest::Approx(f.h(k)).epsilon(1e-14));
    CHECK(y(0, 8 + k) == doctest::Approx(b.h(k)).epsilon(1e-14));
  }
}

TEST_CASE("time reversal with swapped directions reverses the output") {
  Rng rng(11);
  Model<double> m = make_model<double>(ModelSpec{});
  randomize(m, rng, 0.5);
  std::vector<BiLstmLayer<double>> swapped = m.estimator.layers;
  // Above the first layer the input halves [fwd | bwd] trade places too, so
  // the input weight columns are swapped along with the directions.
  for (std::size_t li = 0; li < swapped.size(); ++li) {
    auto& l = swapped[li];
    std::swap(l.forward, l.backward);
    if (li == 0) continue;
    for (auto* d : {&l.forward, &l.backward}) {
      auto wi = d->w_input.matrix();
      const Eigen::Index half = wi.cols() / 2;
      const MatrixD left = wi.leftCols(half);
      wi.leftCols(half) = wi.rightCols(half);
      wi.rightCols(half) = left;
    }
  }
  const MatrixD x = random_seq(rng, 40, 25);
  const MatrixD xr = x.colwise().reverse();
  const MatrixD y = bilstm_forward<double>(x, m.estimator.layers);
  const MatrixD yr = bilstm_forward<double>(xr, swapped);
  const Eigen::Index H = 32;
  // Forward half of the swapped run on reversed input equals the backward
  // half of the original, read in reverse time, and vice versa.
  double worst = 0.0;
  for (Eigen::Index t = 0; t < 40; ++t) {
    worst = std::max(worst, (yr.row(t).head(H) - y.row(39 - t).tail(H)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (yr.row(t).tail(H) - y.row(39 - t).head(H)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("zero weights give zero outputs") {
  const Model<float> m = make_model<float>(ModelSpec{});
  Rng rng(12);
  MatrixF x = random_seq(rng, 125, 25).cast<float>();
  const MatrixF h = bilstm_forward<float>(x, m.estimator.layers);
  CHECK(h.cwiseAbs().maxCoeff() == 0.0f);
  const auto corrected = uwb_correct(x, m);
  CHECK(corrected.size() == 125);
  CHECK(*std::max_element(corrected.begin(), corrected.end()) == 0.0f);
  CHECK(*std::min_element(corrected.begin(), corrected.end()) == 0.0f);
  const MatrixF poses = pose_estimate(estimator_input<float>(x, corrected, m.spec), m);
  CHECK(poses.rows() == 125);
  CHECK(poses.cols() == 9);
  CHECK(poses.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("inference is deterministic and stateless") {
  Rng rng(13);
  Model<float> m = make_model<float>(ModelSpec{});
  randomize(m, rng, 0.3);
  const MatrixF a = random_seq(rng, 125, 25).cast<float>();
  const MatrixF b = random_seq(rng, 125, 25).cast<float>();
  const Prediction p1 = infer_window(m, a);
  (void)infer_window(m, b);
  const Prediction p2 = infer_window(m, a);
  CHECK(p1.pose == p2.pose);
  CHECK(p1.uwb_corrected == p2.uwb_corrected);
  const auto c1 = uwb_correct(a, m);
  const auto c2 = uwb_correct(a, m);
  CHECK(c1 == c2);

  const WindowOutput<float> w = run_window(m, a);
  const RowVector<float> sel = select_output_frame(w.poses, m.spec);
  for (int k = 0; k < 9; ++k) CHECK(static_cast<double>(sel(k)) == p1.pose[static_cast<std::size_t>(k)]);
  CHECK(static_cast<double>(w.corrected[119]) == p1.uwb_corrected);
}

TEST_CASE("estimator input replaces or drops the UWB column") {
  Rng rng(14);
  const MatrixD x = random_seq(rng, 125, 25);
  std::vector<double> corrected(125, 0.33);
  const MatrixD in = estimator_input<double>(x, corrected, ModelSpec{});
  CHECK(in.cols() == 25);
  CHECK(in.col(0).cwiseEqual(0.33).all());
  CHECK(in.rightCols(24) == x.rightCols(24));

  ModelSpec imu;
  imu.use_uwb = false;
  const MatrixD in2 = estimator_input<double>(x, {}, imu);
  CHECK(in2.cols() == 24);
  CHECK(in2 == x.rightCols(24));

  Model<double> m = make_model<double>(imu);
  randomize(m, rng, 0.2);
  const WindowOutput<double> out = run_window(m, x);
  CHECK(out.corrected.empty());
  CHECK(out.poses.cols() == 9);
  // IMU-only models report the raw UWB channel.
  CHECK(infer_window(m, x).uwb_corrected == x(119, 0));
}

TEST_CASE("select_output_frame") {
  MatrixD seq(125, 2);
  for (Eigen::Index i = 0; i < 125; ++i) seq.row(i).setConstant(static_cast<double>(i));
  CHECK(select_output_frame<double>(seq)(0) == 119.0);
  MatrixD constant = MatrixD::Constant(125, 3, 4.5);
  CHECK(select_output_frame<double>(constant)(2) == 4.5);
  CHECK_THROWS_AS(select_output_frame<double>(MatrixD::Zero(124, 2)), InvalidInput);
  const ModelSpec spec;
  CHECK(spec.window_len - (spec.output_frame_index() + 1) == 5);
  CHECK(static_cast<double>(spec.output_frame_lag) / 25.0 == doctest::Approx(0.200));
}

TEST_CASE("shape mismatches are rejected") {
  const Model<float> m = make_model<float>(ModelSpec{});
  CHECK_THROWS_AS(uwb_correct<float>(MatrixF::Zero(125, 24), m), InvalidInput);
  CHECK_THROWS_AS(run_window<float>(m, MatrixF::Zero(125, 26)), InvalidInput);
}

TEST_CASE("float inference tracks double inference") {
  Rng rng(15);
  Model<double> md = make_model<double>(ModelSpec{});
  randomize(md, rng, 0.3);
  const Model<float> mf = model_cast<float>(md);
  const MatrixD x = random_seq(rng, 125, 25);
  const Prediction pd = infer_window(md, x);
  const Prediction pf = infer_window(mf, MatrixF(x.cast<float>()));
  for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(pd.pose[k] - pf.pose[k]) < 1e-4);
  CHECK(std::abs(pd.uwb_corrected - pf.uwb_corrected) < 1e-4);
}
