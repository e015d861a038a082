#include "smartposer/nn.hpp"

#include <cmath>
#include <string>

#include "smartposer/error.hpp"

namespace smartposer::nn {
namespace {

template <typename T>
LstmDirection<T> make_direction(std::uint32_t input_dim, std::uint32_t hidden) {
  return {BasicTensor<T>({4 * hidden, input_dim}), BasicTensor<T>({4 * hidden, hidden}),
          BasicTensor<T>({4 * hidden})};
}

template <typename T>
Network<T> make_network(std::uint32_t input_dim, std::uint32_t layers, std::uint32_t hidden,
                        std::uint32_t out_dim) {
  Network<T> net;
  std::uint32_t in = input_dim;
  for (std::uint32_t l = 0; l < layers; ++l) {
    net.layers.push_back({make_direction<T>(in, hidden), make_direction<T>(in, hidden)});
    in = 2 * hidden;
  }
  net.head_weight = BasicTensor<T>({out_dim, 2 * hidden});
  net.head_bias = BasicTensor<T>({out_dim});
  return net;
}

template <typename T, typename Tensorish, typename Net>
void append_network(std::vector<Tensorish>& out, const std::string& prefix, Net& net) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const std::string base = prefix + ".l" + std::to_string(l);
    for (auto [tag, dir] : {std::pair{".fwd", &layer.forward}, std::pair{".bwd", &layer.backward}}) {
      out.push_back({base + tag + ".w_input", &dir->w_input});
      out.push_back({base + tag + ".w_hidden", &dir->w_hidden});
      out.push_back({base + tag + ".bias", &dir->bias});
    }
  }
  out.push_back({prefix + ".head.weight", &net.head_weight});
  out.push_back({prefix + ".head.bias", &net.head_bias});
}

template <typename T>
void check_network(const Network<T>& net, std::uint32_t input_dim, std::uint32_t layers,
                   std::uint32_t hidden, std::uint32_t out_dim, const char* what) {
  const Network<T> ref = make_network<T>(input_dim, layers, hidden, out_dim);
  auto same = [](const BasicTensor<T>& a, const BasicTensor<T>& b) { return a.dims() == b.dims(); };
  bool ok = net.layers.size() == ref.layers.size() && same(net.head_weight, ref.head_weight) &&
            same(net.head_bias, ref.head_bias) && net.head_weight.all_finite() &&
            net.head_bias.all_finite();
  for (std::size_t l = 0; ok && l < ref.layers.size(); ++l) {
    for (auto [a, b] : {std::pair{&net.layers[l].forward, &ref.layers[l].forward},
                        std::pair{&net.layers[l].backward, &ref.layers[l].backward}}) {
      ok = ok && same(a->w_input, b->w_input) && same(a->w_hidden, b->w_hidden) &&
           same(a->bias, b->bias) && a->w_input.all_finite() && a->w_hidden.all_finite() &&
           a->bias.all_finite();
    }
  }
  if (!ok) throw InvalidInput(std::string("model ") + what + " does not match its spec");
}

template <typename T>
inline T sigmoid(T z) {
  return T{1} / (T{1} + std::exp(-z));
}

// Shared gate arithmetic: z holds the 4H pre-activations on entry and the
// post-activations [i f g o] on exit; c is updated in place, h written.
template <typename T, typename ZVec, typename CVec, typename HVec>
inline void lstm_update(ZVec& z, CVec& c, HVec& h, Eigen::Index H) {
  for (Eigen::Index k = 0; k < H; ++k) {
    const T i = sigmoid(z[k]);
    const T f = sigmoid(z[H + k]);
    const T g = std::tanh(z[2 * H + k]);
    const T o = sigmoid(z[3 * H + k]);
    z[k] = i;
    z[H + k] = f;
    z[2 * H + k] = g;
    z[3 * H + k] = o;
    c[k] = f * c[k] + i * g;
    h[k] = o * std::tanh(c[k]);
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (input_dim < 2 || corrector_layers == 0 || corrector_hidden == 0 || estimator_layers == 0 ||
      estimator_hidden == 0 || pose_dim == 0 || window_len == 0) {
    throw InvalidInput("ModelSpec: dimensions must be positive");
  }
  if (output_frame_lag >= window_len) throw InvalidInput("ModelSpec: lag must be < window_len");
}

template <typename T>
Model<T> make_model(const ModelSpec& spec) {
  spec.validate();
  Model<T> m;
  m.spec = spec;
  if (spec.use_uwb) {
    m.corrector = make_network<T>(spec.input_dim, spec.corrector_layers, spec.corrector_hidden, 1);
  }
  m.estimator = make_network<T>(spec.estimator_input_dim(), spec.estimator_layers,
                                spec.estimator_hidden, spec.pose_dim);
  return m;
}

template <typename T>
std::vector<NamedTensor<T>> named_tensors(Model<T>& model) {
  std::vector<NamedTensor<T>> out;
  if (!model.corrector.empty()) append_network<T>(out, "corrector", model.corrector);
  append_network<T>(out, "estimator", model.estimator);
  return out;
}

template <typename T>
std::vector<ConstNamedTensor<T>> named_tensors(const Model<T>& model) {
  std::vector<ConstNamedTensor<T>> out;
  if (!model.corrector.empty()) append_network<T>(out, "corrector", model.corrector);
  append_network<T>(out, "estimator", model.estimator);
  return out;
}

template <typename T>
std::size_t parameter_count(const Network<T>& net) {
  std::size_t n = net.head_weight.size() + net.head_bias.size();
  for (const auto& l : net.layers) {
    for (const auto* d : {&l.forward, &l.backward}) n += d->w_input.size() + d->w_hidden.size() + d->bias.size();
  }
  return n;
}

template <typename T>
std::size_t parameter_count(const Model<T>& model) {
  return parameter_count(model.corrector) + parameter_count(model.estimator);
}

template <typename T>
void validate_model(const Model<T>& model) {
  const ModelSpec& s = model.spec;
  s.validate();
  if (s.use_uwb) {
    check_network(model.corrector, s.input_dim, s.corrector_layers, s.corrector_hidden, 1, "corrector");
  } else if (!model.corrector.empty()) {
    throw InvalidInput("IMU-only model must not carry a corrector");
  }
  check_network(model.estimator, s.estimator_input_dim(), s.estimator_layers, s.estimator_hidden,
                s.pose_dim, "estimator");
}

template <typename T>
CellState<T> lstm_cell(std::span<const T> x, std::span<const T> h, std::span<const T> c,
                       const LstmDirection<T>& w) {
  const auto H = static_cast<Eigen::Index>(w.hidden());
  if (x.size() != w.input_dim() || h.size() != w.hidden() || c.size() != w.hidden() ||
      w.bias.size() != static_cast<std::size_t>(4 * H)) {
    throw InvalidInput("lstm_cell: shape mismatch");
  }
  Eigen::Map<const ColVector<T>> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::Map<const ColVector<T>> hv(h.data(), H);
  CellState<T> out;
  out.c = Eigen::Map<const ColVector<T>>(c.data(), H);
  out.h.resize(H);
  ColVector<T> z = w.w_input.matrix() * xv + w.w_hidden.matrix() * hv + w.bias.vector();
  lstm_update<T>(z, out.c, out.h, H);
  return out;
}

template <typename T>
Matrix<T> lstm_direction_forward(const Matrix<T>& seq, const LstmDirection<T>& w, bool reverse,
                                 DirectionTrace<T>* trace) {
  const auto H = static_cast<Eigen::Index>(w.hidden());
  const Eigen::Index steps = seq.rows();
  if (static_cast<std::size_t>(seq.cols()) != w.input_dim() || H == 0) {
    throw InvalidInput("lstm forward: input width " + std::to_string(seq.cols()) + " != " +
                       std::to_string(w.input_dim()));
  }
  // Input projections for all steps at once.
  Matrix<T> z = seq * w.w_input.matrix().transpose();
  z.rowwise() += w.bias.vector().transpose();

  const auto wh = w.w_hidden.matrix();
  Matrix<T> out(steps, H);
  ColVector<T> h = ColVector<T>::Zero(H);
  ColVector<T> c = ColVector<T>::Zero(H);
  ColVector<T> zt(4 * H);
  if (trace) {
    trace->gates.resize(steps, 4 * H);
    trace->cell.resize(steps, H);
  }
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    zt.noalias() = z.row(t).transpose();
    zt.noalias() += wh * h;
    lstm_update<T>(zt, c, h, H);
    out.row(t) = h.transpose();
    if (trace) {
      trace->gates.row(t) = zt.transpose();
      trace->cell.row(t) = c.transpose();
    }
  }
  if (trace) trace->hidden = out;
  return out;
}

template <typename T>
Matrix<T> bilstm_forward(const Matrix<T>& seq, std::span<const BiLstmLayer<T>> layers,
                         NetworkTrace<T>* trace) {
  if (seq.rows() < 1) throw InvalidInput("bilstm_forward: empty sequence");
  if (trace) trace->layers.assign(layers.size(), {});
  Matrix<T> x = seq;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerTrace<T>* lt = trace ? &trace->layers[l] : nullptr;
    const Matrix<T> f = lstm_direction_forward(x, layers[l].forward, false, lt ? &lt->forward : nullptr);
    const Matrix<T> b = lstm_direction_forward(x, layers[l].backward, true, lt ? &lt->backward : nullptr);
    Matrix<T> next(x.rows(), f.cols() + b.cols());
    next << f, b;
    if (lt) lt->input = std::move(x);
    x = std::move(next);
  }
  return x;
}

template <typename T>
Matrix<T> network_forward(const Network<T>& net, const Matrix<T>& seq, NetworkTrace<T>* trace) {
  Matrix<T> top = bilstm_forward<T>(seq, net.layers, trace);
  if (static_cast<std::size_t>(top.cols()) != net.head_weight.dim(1)) {
    throw InvalidInput("network_forward: head width mismatch");
  }
  Matrix<T> y = top * net.head_weight.matrix().transpose();
  y.rowwise() += net.head_bias.vector().transpose();
  if (trace) trace->top = std::move(top);
  return y;
}

template <typename T>
std::vector<T> uwb_correct(const Matrix<T>& window, const Model<T>& model) {
  if (model.corrector.empty()) throw InvalidInput("uwb_correct: model has no corrector");
  const Matrix<T> y = network_forward(model.corrector, window);
  return std::vector<T>(y.data(), y.data() + y.rows());
}

template <typename T>
Matrix<T> estimator_input(const Matrix<T>& window, std::span<const T> corrected, const ModelSpec& spec) {
  if (static_cast<std::size_t>(window.cols()) != spec.input_dim) {
    throw InvalidInput("estimator_input: window width mismatch");
  }
  if (!spec.use_uwb) return window.rightCols(window.cols() - 1);
  if (corrected.size() != static_cast<std::size_t>(window.rows())) {
    throw InvalidInput("estimator_input: corrected length mismatch");
  }
  Matrix<T> in = window;
  in.col(0) = Eigen::Map<const ColVector<T>>(corrected.data(), window.rows());
  return in;
}

template <typename T>
Matrix<T> pose_estimate(const Matrix<T>& input, const Model<T>& model) {
  return network_forward(model.estimator, input);
}

template <typename T>
RowVector<T> select_output_frame(const Matrix<T>& seq, const ModelSpec& spec) {
  if (static_cast<std::size_t>(seq.rows()) != spec.window_len) {
    throw InvalidInput("select_output_frame: sequence length " + std::to_string(seq.rows()) +
                       " != " + std::to_string(spec.window_len));
  }
  return seq.row(static_cast<Eigen::Index>(spec.output_frame_index()));
}

template <typename T>
WindowOutput<T> run_window(const Model<T>& model, const Matrix<T>& window) {
  WindowOutput<T> out;
  if (model.spec.use_uwb) out.corrected = uwb_correct(window, model);
  out.poses = pose_estimate(estimator_input<T>(window, out.corrected, model.spec), model);
  return out;
}

template <typename T>
Prediction infer_window(const Model<T>& model, const Matrix<T>& window) {
  const WindowOutput<T> out = run_window(model, window);
  const RowVector<T> pose = select_output_frame(out.poses, model.spec);
  Prediction p;
  for (std::size_t j = 0; j < 9 && j < static_cast<std::size_t>(pose.size()); ++j) {
    p.pose[j] = static_cast<double>(pose[static_cast<Eigen::Index>(j)]);
  }
  const auto idx = static_cast<Eigen::Index>(model.spec.output_frame_index());
  p.uwb_corrected = model.spec.use_uwb ? static_cast<double>(out.corrected[static_cast<std::size_t>(idx)])
                                       : static_cast<double>(window(idx, 0));
  return p;
}

#define SMARTPOSER_NN_INSTANTIATE(T)                                                              \
  template Model<T> make_model<T>(const ModelSpec&);                                              \
  template std::vector<NamedTensor<T>> named_tensors<T>(Model<T>&);                               \
  template std::vector<ConstNamedTensor<T>> named_tensors<T>(const Model<T>&);                    \
  template std::size_t parameter_count<T>(const Network<T>&);                                     \
  template std::size_t parameter_count<T>(const Model<T>&);                                       \
  template void validate_model<T>(const Model<T>&);                                               \
  template CellState<T> lstm_cell<T>(std::span<const T>, std::span<const T>, std::span<const T>, \
                                     const LstmDirection<T>&);                                    \
  template Matrix<T> lstm_direction_forward<T>(const Matrix<T>&, const LstmDirection<T>&, bool,   \
                                               DirectionTrace<T>*);                               \
  template Matrix<T> bilstm_forward<T>(const Matrix<T>&, std::span<const BiLstmLayer<T>>,         \
                                       NetworkTrace<T>*);                                         \
  template Matrix<T> network_forward<T>(const Network<T>&, const Matrix<T>&, NetworkTrace<T>*);   \
  template std::vector<T> uwb_correct<T>(const Matrix<T>&, const Model<T>&);                      \
  template Matrix<T> estimator_input<T>(const Matrix<T>&, std::span<const T>, const ModelSpec&);  \
  template Matrix<T> pose_estimate<T>(const Matrix<T>&, const Model<T>&);                         \
  template RowVector<T> select_output_frame<T>(const Matrix<T>&, const ModelSpec&);               \
  template WindowOutput<T> run_window<T>(const Model<T>&, const Matrix<T>&);                      \
  template Prediction infer_window<T>(const Model<T>&, const Matrix<T>&);

SMARTPOSER_NN_INSTANTIATE(float)
SMARTPOSER_NN_INSTANTIATE(double)

#undef SMARTPOSER_NN_INSTANTIATE

}  // namespace smartposer::nn
