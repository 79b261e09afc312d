#pragma once

// Trainable heads over frozen embeddings:
//   - the self-supervised adapter, softmax(ReLU(x W1) W2), bias-free;
//   - the CLIP-Adapter baseline (residual bottleneck MLPs on the image
//     features and, optionally, the class text embeddings);
//   - a linear probe (multinomial logistic regression).
// All three train with minibatch Adam on softmax cross-entropy and are pure
// functions of (data, labels, config).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "svl/matrix.hpp"
#include "svl/mlp.hpp"
#include "svl/protocol.hpp"
#include "svl/zeroshot.hpp"

namespace svl {

struct TrainConfig {
  std::size_t epochs = protocol::kEpochs;
  std::size_t batch_size = protocol::kBatchSize;
  double lr = protocol::kLearningRate;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t hidden_dim = protocol::kHiddenDim;
  bool normalize_inputs = true;
  InitMode init = InitMode::kUniform;

  void validate() const;
};

struct TrainTrace {
  double initial_loss = 0.0;        // full-set loss before the first step
  std::vector<double> epoch_loss;   // mean minibatch loss per epoch
  double final_loss = 0.0;          // full-set loss after training
  std::vector<std::string> warnings;
};

struct AdapterParams {
  MlpParams<float> mlp;
  std::size_t hidden_dim = protocol::kHiddenDim;
  std::string input_encoder_id;
  bool normalize_inputs = true;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return mlp.input_dim(); }
  std::size_t num_classes() const { return mlp.num_classes(); }
  friend bool operator==(const AdapterParams&, const AdapterParams&) = default;
};

struct TrainedAdapter {
  AdapterParams params;
  TrainTrace trace;
};

TrainedAdapter train_svl_adapter(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                 const TrainConfig& cfg, const std::string& encoder_id = {});

ProbabilityMatrix predict_svl_adapter(const AdapterParams& params, const Matrix& items);

/// Writes "<prefix>.adapter" (key=value) plus "<prefix>.w1.svlemb" and
/// "<prefix>.w2.svlemb" in the embedding matrix format.
void save_adapter(const std::filesystem::path& prefix, const AdapterParams& params);
/// Takes the path of the ".adapter" file.
AdapterParams load_adapter(const std::filesystem::path& adapter_file);

struct LinearProbeParams {
  Matrix w;  // D x K
  bool normalize_inputs = true;
  friend bool operator==(const LinearProbeParams&, const LinearProbeParams&) = default;
};

struct TrainedLinearProbe {
  LinearProbeParams params;
  TrainTrace trace;
};

/// Zero-initialized weights, so the starting loss is ln K.
TrainedLinearProbe train_linear_probe(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                      const TrainConfig& cfg);
ProbabilityMatrix predict_linear_probe(const LinearProbeParams& params, const Matrix& items);

struct ClipAdapterConfig {
  double alpha = protocol::kClipAdapterAlpha;
  double beta = protocol::kClipAdapterBeta;
  bool visual_only = true;
  std::size_t reduction = protocol::kClipAdapterReduction;
  double temperature = protocol::kTemperature;
};

template <typename T>
struct ClipAdapterWeights {
  BasicMatrix<T> wv1;  // D x D/r
  BasicMatrix<T> wv2;  // D/r x D
  BasicMatrix<T> wt1;  // empty when visual_only
  BasicMatrix<T> wt2;
};

struct ClipAdapterParams {
  ClipAdapterWeights<float> weights;
  double alpha = protocol::kClipAdapterAlpha;
  double beta = protocol::kClipAdapterBeta;
  bool visual_only = true;
  double temperature = protocol::kTemperature;
};

/// Adapted rows: alpha * ReLU(x W1) W2 + (1 - alpha) * x.
template <typename T>
BasicMatrix<T> residual_adapt(const BasicMatrix<T>& x, const BasicMatrix<T>& w1, const BasicMatrix<T>& w2, T alpha);

/// Adapted image features f* (rows), exactly f when alpha = 0.
Matrix clip_adapter_features(const ClipAdapterParams& params, const Matrix& images);
/// Adapted class embeddings W* (rows); the input when visual_only or beta = 0.
Matrix clip_adapter_text(const ClipAdapterParams& params, const Matrix& text_embeddings);

struct ClipAdapterLoss {
  double loss = 0.0;
  ClipAdapterWeights<double> grads;
};

/// Cross-entropy of softmax(T * cos(f*, W*)) and its gradient with respect to
/// every adapter weight, in 64-bit. Used for gradient checking.
ClipAdapterLoss clip_adapter_loss_and_grads(const ClipAdapterWeights<double>& w, const Matrix64& images,
                                            const Matrix64& text, std::span<const int> labels, double alpha,
                                            double beta, bool visual_only, double temperature);

struct TrainedClipAdapter {
  ClipAdapterParams params;
  TrainTrace trace;
};

TrainedClipAdapter train_clip_adapter(const Matrix& images, std::span<const int> labels, const Matrix& text_embeddings,
                                      const ClipAdapterConfig& acfg, const TrainConfig& cfg);

ProbabilityMatrix predict_clip_adapter(const ClipAdapterParams& params, const Matrix& images,
                                       const Matrix& text_embeddings);

}  // namespace svl
