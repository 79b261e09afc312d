#include "svl/adapters.hpp"

#include <functional>
#include <numeric>

#include "svl/adam.hpp"
#include "svl/embedding_store.hpp"
#include "svl/error.hpp"
#include "svl/io.hpp"
#include "svl/numerics.hpp"
#include "svl/rng.hpp"

namespace svl {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (hidden_dim == 0) throw ConfigError("hidden dim must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kClipInitStream = 0xC11A;

// Loss over a batch; fills `grads` (one matrix per parameter block, same
// order as the parameter spans) when non-null.
using LossGradFn = std::function<double(const Matrix& bx, std::span<const int> by, std::vector<Matrix>* grads)>;

void check_training_inputs(const Matrix& x, std::span<const int> y, std::size_t num_classes, TrainTrace& trace) {
  if (x.rows() == 0) throw EmptyInputError("training set is empty");
  if (y.size() != x.rows()) throw ShapeError("labels/features length mismatch");
  if (num_classes == 0) throw InvalidInputError("num_classes must be >= 1");
  validate_labels(y, num_classes, "training labels");
  require_finite(x, "training features");
  std::vector<bool> present(num_classes, false);
  for (int l : y) present[l] = true;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!present[c]) trace.warnings.push_back("class " + std::to_string(c) + " has no training items");
  }
}

TrainTrace train_minibatch(const std::vector<std::span<float>>& params, const Matrix& x, std::span<const int> y,
                           const TrainConfig& cfg, const LossGradFn& fn, TrainTrace trace) {
  AdamState<float> adam;
  adam.config.lr = cfg.lr;
  trace.initial_loss = fn(x, y, nullptr);

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, kShuffleStream));
  std::vector<Matrix> grads;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0;
    // The last partial batch is kept.
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix bx = x.select_rows(idx);
      batch_labels.clear();
      for (std::size_t i : idx) batch_labels.push_back(y[i]);

      const double loss = fn(bx, batch_labels, &grads);
      epoch_loss += loss * static_cast<double>(idx.size());

      std::vector<std::span<const float>> g;
      for (const Matrix& m : grads) g.push_back(m.values());
      adam_step<float>(adam, params, g);
    }
    trace.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  trace.final_loss = fn(x, y, nullptr);
  return trace;
}

Matrix prepare_inputs(const Matrix& x, bool normalize) { return normalize ? l2_normalize_rows(x) : x; }

}  // namespace

// ---------------------------------------------------------------------------
// Self-supervised adapter

TrainedAdapter train_svl_adapter(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                 const TrainConfig& cfg, const std::string& encoder_id) {
  cfg.validate();
  TrainTrace trace;
  check_training_inputs(features, labels, num_classes, trace);
  const Matrix x = prepare_inputs(features, cfg.normalize_inputs);

  TrainedAdapter out;
  out.params.mlp = init_mlp<float>(x.cols(), cfg.hidden_dim, num_classes, cfg.seed, cfg.init);
  out.params.hidden_dim = cfg.hidden_dim;
  out.params.input_encoder_id = encoder_id;
  out.params.normalize_inputs = cfg.normalize_inputs;
  out.params.seed = cfg.seed;

  MlpParams<float>& mlp = out.params.mlp;
  const std::vector<std::span<float>> spans = {mlp.w1.values(), mlp.w2.values()};
  auto fn = [&mlp](const Matrix& bx, std::span<const int> by, std::vector<Matrix>* grads) -> double {
    if (!grads) {
      const MlpForward<float> fwd = mlp_forward(mlp, bx);
      return softmax_ce<float>(fwd.logits, by, nullptr);
    }
    LossAndGrads<float> lg = ce_loss_and_grads(mlp, bx, by);
    grads->clear();
    grads->push_back(std::move(lg.grads.w1));
    grads->push_back(std::move(lg.grads.w2));
    return lg.loss;
  };
  out.trace = train_minibatch(spans, x, labels, cfg, fn, std::move(trace));
  return out;
}

ProbabilityMatrix predict_svl_adapter(const AdapterParams& params, const Matrix& items) {
  params.mlp.validate();
  if (items.cols() != params.input_dim()) {
    throw DimensionMismatchError("adapter expects dim " + std::to_string(params.input_dim()) + ", got " +
                                 std::to_string(items.cols()));
  }
  require_finite(items, "predict_svl_adapter");
  const Matrix x = prepare_inputs(items, params.normalize_inputs);
  const MlpForward<float> fwd = mlp_forward(params.mlp, x);
  ProbabilityMatrix out;
  out.probs = softmax(fwd.logits.cast<double>());
  out.source = ProbSource::kAdapter;
  out.temperature_used = 1.0;
  return out;
}

void save_adapter(const std::filesystem::path& prefix, const AdapterParams& params) {
  std::filesystem::path w1 = prefix;
  w1 += ".w1.svlemb";
  std::filesystem::path w2 = prefix;
  w2 += ".w2.svlemb";
  std::filesystem::path manifest = prefix;
  manifest += ".adapter";
  write_matrix(w1, params.mlp.w1);
  write_matrix(w2, params.mlp.w2);
  io::KeyValues kv{
      {"hidden_dim", std::to_string(params.hidden_dim)},
      {"num_classes", std::to_string(params.num_classes())},
      {"input_dim", std::to_string(params.input_dim())},
      {"encoder_id", params.input_encoder_id},
      {"normalize_inputs", params.normalize_inputs ? "true" : "false"},
      {"seed", std::to_string(params.seed)},
      {"w1", w1.filename().string()},
      {"w2", w2.filename().string()},
  };
  io::write_file_atomic(manifest, io::format_key_values(kv));
}

AdapterParams load_adapter(const std::filesystem::path& adapter_file) {
  const io::KeyValues kv = io::read_key_values(adapter_file);
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError(FormatErrorKind::kSyntax, adapter_file.string() + ": missing key " + k);
    return it->second;
  };
  const std::filesystem::path base = adapter_file.parent_path();
  AdapterParams p;
  p.mlp.w1 = read_matrix(base / get("w1")).matrix;
  p.mlp.w2 = read_matrix(base / get("w2")).matrix;
  p.mlp.validate();
  try {
    p.hidden_dim = std::stoull(get("hidden_dim"));
    p.seed = std::stoull(get("seed"));
    if (std::stoull(get("num_classes")) != p.num_classes()) throw ShapeError("num_classes disagrees with w2");
  } catch (const std::invalid_argument&) {
    throw FormatError(FormatErrorKind::kSyntax, adapter_file.string() + ": malformed number");
  }
  if (p.hidden_dim != p.mlp.hidden_dim()) throw ShapeError(adapter_file.string() + ": hidden_dim disagrees with w1");
  p.input_encoder_id = get("encoder_id");
  p.normalize_inputs = get("normalize_inputs") == "true";
  return p;
}

// ---------------------------------------------------------------------------
// Linear probe

TrainedLinearProbe train_linear_probe(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                      const TrainConfig& cfg) {
  cfg.validate();
  TrainTrace trace;
  check_training_inputs(features, labels, num_classes, trace);
  const Matrix x = prepare_inputs(features, cfg.normalize_inputs);

  TrainedLinearProbe out;
  out.params.w = Matrix(x.cols(), num_classes);
  out.params.normalize_inputs = cfg.normalize_inputs;
  Matrix& w = out.params.w;
  auto fn = [&w](const Matrix& bx, std::span<const int> by, std::vector<Matrix>* grads) -> double {
    const Matrix logits = matmul(bx, w);
    if (!grads) return softmax_ce<float>(logits, by, nullptr);
    Matrix dlogits;
    const double loss = softmax_ce<float>(logits, by, &dlogits);
    grads->clear();
    grads->push_back(matmul_at_b(bx, dlogits));
    return loss;
  };
  out.trace = train_minibatch({w.values()}, x, labels, cfg, fn, std::move(trace));
  return out;
}

ProbabilityMatrix predict_linear_probe(const LinearProbeParams& params, const Matrix& items) {
  if (items.cols() != params.w.rows()) {
    throw DimensionMismatchError("linear probe expects dim " + std::to_string(params.w.rows()) + ", got " +
                                 std::to_string(items.cols()));
  }
  require_finite(items, "predict_linear_probe");
  const Matrix x = prepare_inputs(items, params.normalize_inputs);
  ProbabilityMatrix out;
  out.probs = softmax(matmul(x, params.w).cast<double>());
  out.source = ProbSource::kAdapter;
  out.temperature_used = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// CLIP-Adapter

template <typename T>
BasicMatrix<T> residual_adapt(const BasicMatrix<T>& x, const BasicMatrix<T>& w1, const BasicMatrix<T>& w2, T alpha) {
  BasicMatrix<T> hidden = matmul(x, w1);
  relu_inplace(hidden);
  BasicMatrix<T> out = matmul(hidden, w2);
  if (out.rows() != x.rows() || out.cols() != x.cols()) throw ShapeError("residual adapter must preserve shape");
  kernels::blend(alpha, out.data(), x.data(), out.data(), out.size());
  return out;
}

template Matrix residual_adapt<float>(const Matrix&, const Matrix&, const Matrix&, float);
template Matrix64 residual_adapt<double>(const Matrix64&, const Matrix64&, const Matrix64&, double);

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidInputError(std::string(name) + " must lie in [0, 1]");
}

bool adapts_text(bool visual_only, const BasicMatrix<float>& wt1) { return !visual_only && !wt1.empty(); }

template <typename T>
BasicMatrix<T> normalize_rows_keep_norms(const BasicMatrix<T>& x, std::vector<T>& norms) {
  BasicMatrix<T> y = x;
  norms.assign(x.rows(), T(0));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = y.row(r);
    const T n = std::sqrt(kernels::dot(row.data(), row.data(), row.size()));
    if (!(n > T(0))) throw DegenerateEmbeddingError("adapted row " + std::to_string(r) + " has zero norm", r);
    norms[r] = n;
    kernels::scale(T(1) / n, row.data(), row.size());
  }
  return y;
}

// y = x / |x|  =>  dx = (dy - y (y . dy)) / |x|
template <typename T>
BasicMatrix<T> normalize_rows_backward(const BasicMatrix<T>& y, const std::vector<T>& norms, const BasicMatrix<T>& dy) {
  BasicMatrix<T> dx = dy;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto dr = dx.row(r);
    const T proj = kernels::dot(yr.data(), dr.data(), yr.size());
    kernels::axpy(-proj, yr.data(), dr.data(), yr.size());
    kernels::scale(T(1) / norms[r], dr.data(), dr.size());
  }
  return dx;
}

template <typename T>
void mask_relu(BasicMatrix<T>& grad, const BasicMatrix<T>& pre) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(pre.data()[i] > T(0))) grad.data()[i] = T(0);
  }
}

template <typename T>
struct ResidualBranch {
  BasicMatrix<T> pre;
  BasicMatrix<T> hidden;
  BasicMatrix<T> out;
};

template <typename T>
ResidualBranch<T> residual_forward(const BasicMatrix<T>& x, const BasicMatrix<T>& w1, const BasicMatrix<T>& w2, T alpha) {
  ResidualBranch<T> b;
  b.pre = matmul(x, w1);
  b.hidden = b.pre;
  relu_inplace(b.hidden);
  b.out = matmul(b.hidden, w2);
  kernels::blend(alpha, b.out.data(), x.data(), b.out.data(), b.out.size());
  return b;
}

// Given d(out), accumulates the weight gradients of one residual branch.
template <typename T>
void residual_backward(const ResidualBranch<T>& b, const BasicMatrix<T>& x, const BasicMatrix<T>& w2, T alpha,
                       const BasicMatrix<T>& dout, BasicMatrix<T>& dw1, BasicMatrix<T>& dw2) {
  BasicMatrix<T> dadapter = dout;
  kernels::scale(alpha, dadapter.data(), dadapter.size());
  dw2 = matmul_at_b(b.hidden, dadapter);
  BasicMatrix<T> dhidden = matmul_a_bt(dadapter, w2);
  mask_relu(dhidden, b.pre);
  dw1 = matmul_at_b(x, dhidden);
}

template <typename T>
T clip_loss_impl(const ClipAdapterWeights<T>& w, const BasicMatrix<T>& images, const BasicMatrix<T>& text,
                 std::span<const int> labels, T alpha, T beta, bool adapt_text, T temperature,
                 ClipAdapterWeights<T>* grads) {
  const ResidualBranch<T> vis = residual_forward(images, w.wv1, w.wv2, alpha);
  ResidualBranch<T> txt;
  const BasicMatrix<T>* wstar = &text;
  if (adapt_text) {
    txt = residual_forward(text, w.wt1, w.wt2, beta);
    wstar = &txt.out;
  }
  std::vector<T> fnorms, wnorms;
  const BasicMatrix<T> fn = normalize_rows_keep_norms(vis.out, fnorms);
  const BasicMatrix<T> wn = normalize_rows_keep_norms(*wstar, wnorms);
  BasicMatrix<T> logits = matmul_a_bt(fn, wn);
  kernels::scale(temperature, logits.data(), logits.size());

  if (!grads) return softmax_ce<T>(logits, labels, nullptr);

  BasicMatrix<T> dlogits;
  const T loss = softmax_ce<T>(logits, labels, &dlogits);
  kernels::scale(temperature, dlogits.data(), dlogits.size());

  const BasicMatrix<T> dfn = matmul(dlogits, wn);
  const BasicMatrix<T> dfstar = normalize_rows_backward(fn, fnorms, dfn);
  residual_backward(vis, images, w.wv2, alpha, dfstar, grads->wv1, grads->wv2);

  if (adapt_text) {
    const BasicMatrix<T> dwn = matmul_at_b(dlogits, fn);
    const BasicMatrix<T> dwstar = normalize_rows_backward(wn, wnorms, dwn);
    residual_backward(txt, text, w.wt2, beta, dwstar, grads->wt1, grads->wt2);
  }
  return loss;
}

void check_clip_inputs(const Matrix& images, const Matrix& text) {
  if (text.rows() == 0) throw InvalidInputError("CLIP-Adapter needs class text embeddings");
  if (images.cols() != text.cols()) {
    throw DimensionMismatchError("image dim " + std::to_string(images.cols()) + " != text dim " +
                                 std::to_string(text.cols()));
  }
}

}  // namespace

Matrix clip_adapter_features(const ClipAdapterParams& params, const Matrix& images) {
  check_unit_interval(params.alpha, "alpha");
  return residual_adapt(images, params.weights.wv1, params.weights.wv2, static_cast<float>(params.alpha));
}

Matrix clip_adapter_text(const ClipAdapterParams& params, const Matrix& text_embeddings) {
  if (!adapts_text(params.visual_only, params.weights.wt1)) return text_embeddings;
  check_unit_interval(params.beta, "beta");
  return residual_adapt(text_embeddings, params.weights.wt1, params.weights.wt2, static_cast<float>(params.beta));
}

ClipAdapterLoss clip_adapter_loss_and_grads(const ClipAdapterWeights<double>& w, const Matrix64& images,
                                            const Matrix64& text, std::span<const int> labels, double alpha,
                                            double beta, bool visual_only, double temperature) {
  validate_labels(labels, text.rows(), "labels");
  ClipAdapterLoss out;
  const bool adapt_text = !visual_only && !w.wt1.empty();
  out.loss = clip_loss_impl<double>(w, images, text, labels, alpha, beta, adapt_text, temperature, &out.grads);
  return out;
}

TrainedClipAdapter train_clip_adapter(const Matrix& images, std::span<const int> labels, const Matrix& text_embeddings,
                                      const ClipAdapterConfig& acfg, const TrainConfig& cfg) {
  cfg.validate();
  check_clip_inputs(images, text_embeddings);
  check_unit_interval(acfg.alpha, "alpha");
  check_unit_interval(acfg.beta, "beta");
  if (acfg.reduction == 0) throw ConfigError("CLIP-Adapter reduction must be >= 1");
  require_finite(text_embeddings, "text embeddings");
  TrainTrace trace;
  check_training_inputs(images, labels, text_embeddings.rows(), trace);

  const std::size_t dim = images.cols();
  const std::size_t bottleneck = std::max<std::size_t>(1, dim / acfg.reduction);
  TrainedClipAdapter out;
  ClipAdapterParams& p = out.params;
  p.alpha = acfg.alpha;
  p.beta = acfg.beta;
  p.visual_only = acfg.visual_only;
  p.temperature = acfg.temperature;

  Rng rng(derive_seed(cfg.seed, kClipInitStream));
  auto make = [&rng](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    fill_uniform_fan_in(m, rng);
    return m;
  };
  p.weights.wv1 = make(dim, bottleneck);
  p.weights.wv2 = make(bottleneck, dim);
  if (!acfg.visual_only) {
    p.weights.wt1 = make(dim, bottleneck);
    p.weights.wt2 = make(bottleneck, dim);
  }

  std::vector<std::span<float>> spans = {p.weights.wv1.values(), p.weights.wv2.values()};
  if (!acfg.visual_only) {
    spans.push_back(p.weights.wt1.values());
    spans.push_back(p.weights.wt2.values());
  }
  const bool adapt_text = !acfg.visual_only;
  const float alpha = static_cast<float>(acfg.alpha);
  const float beta = static_cast<float>(acfg.beta);
  const float temperature = static_cast<float>(acfg.temperature);
  auto fn = [&](const Matrix& bx, std::span<const int> by, std::vector<Matrix>* grads) -> double {
    if (!grads) {
      return clip_loss_impl<float>(p.weights, bx, text_embeddings, by, alpha, beta, adapt_text, temperature, nullptr);
    }
    ClipAdapterWeights<float> g;
    const double loss =
        clip_loss_impl<float>(p.weights, bx, text_embeddings, by, alpha, beta, adapt_text, temperature, &g);
    grads->clear();
    grads->push_back(std::move(g.wv1));
    grads->push_back(std::move(g.wv2));
    if (adapt_text) {
      grads->push_back(std::move(g.wt1));
      grads->push_back(std::move(g.wt2));
    }
    return loss;
  };
  out.trace = train_minibatch(spans, images, labels, cfg, fn, std::move(trace));
  return out;
}

ProbabilityMatrix predict_clip_adapter(const ClipAdapterParams& params, const Matrix& images,
                                       const Matrix& text_embeddings) {
  check_clip_inputs(images, text_embeddings);
  if (params.weights.wv1.rows() != images.cols()) {
    throw DimensionMismatchError("CLIP-Adapter expects dim " + std::to_string(params.weights.wv1.rows()));
  }
  ProbabilityMatrix out;
  out.probs = softmax(cosine_logits(clip_adapter_features(params, images),
                                    clip_adapter_text(params, text_embeddings), params.temperature));
  out.source = ProbSource::kAdapter;
  out.temperature_used = params.temperature;
  return out;
}

}  // namespace svl
