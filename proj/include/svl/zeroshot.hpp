#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "svl/embedding_store.hpp"
#include "svl/matrix.hpp"
#include "svl/protocol.hpp"

namespace svl {

enum class ProbSource { kZeroShot, kAdapter, kFused, kExternal };
std::string_view to_string(ProbSource s);

/// Row-stochastic N x K predictions. Stored in 64-bit.
struct ProbabilityMatrix {
  Matrix64 probs;
  ProbSource source = ProbSource::kExternal;
  double temperature_used = 0.0;

  std::size_t rows() const { return probs.rows(); }
  std::size_t cols() const { return probs.cols(); }
  /// Entries >= 0 and rows summing to 1 within `tol`.
  void validate(double tol = 1e-6) const;
};

enum class LambdaMethod { kAutoConfidence, kValidationSweep, kFixed };
std::string_view to_string(LambdaMethod m);

struct LambdaEstimate {
  double value = 0.0;
  std::size_t num_items = 0;
  LambdaMethod method = LambdaMethod::kFixed;
};

/// T * cos(a_i, b_j) for every pair of rows, both sides L2-normalized first.
Matrix64 cosine_logits(const Matrix& a, const Matrix& b, double temperature);

/// softmax(temperature * cosine(image, class text)).
ProbabilityMatrix zero_shot_probs(const Matrix& images, const Matrix& text_embeddings,
                                  double temperature = protocol::kTemperature);
ProbabilityMatrix zero_shot_probs(const EmbeddingTable& images, const ClassSpace& classes,
                                  double temperature = protocol::kTemperature);

/// Mean over rows of the row maximum: the average prediction confidence.
LambdaEstimate estimate_lambda(const ProbabilityMatrix& probs);

/// Per-row maximum probability.
std::vector<double> row_confidences(const ProbabilityMatrix& probs);

struct ConfidenceHistogram {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> counts;
};

/// Uniform bins over [0, 1], half-open except the last, which includes 1.
ConfidenceHistogram confidence_histogram(const ProbabilityMatrix& probs, std::size_t num_bins);
ConfidenceHistogram histogram_of(const std::vector<double>& values, std::size_t num_bins);

/// "bin_lo,bin_hi,count" header plus one line per bin.
std::string histogram_csv(const ConfidenceHistogram& h);

}  // namespace svl
