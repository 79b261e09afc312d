#include "svl/zeroshot.hpp"

#include <cmath>

#include "svl/error.hpp"
#include "svl/io.hpp"
#include "svl/numerics.hpp"

namespace svl {

std::string_view to_string(ProbSource s) {
  switch (s) {
    case ProbSource::kZeroShot: return "zero-shot";
    case ProbSource::kAdapter: return "adapter";
    case ProbSource::kFused: return "fused";
    case ProbSource::kExternal: return "external";
  }
  return "unknown";
}

std::string_view to_string(LambdaMethod m) {
  switch (m) {
    case LambdaMethod::kAutoConfidence: return "auto-confidence";
    case LambdaMethod::kValidationSweep: return "validation-sweep";
    case LambdaMethod::kFixed: return "fixed";
  }
  return "unknown";
}

void ProbabilityMatrix::validate(double tol) const {
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double sum = 0;
    for (double v : probs.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidInputError("probability row " + std::to_string(r) + " has a negative or non-finite entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw InvalidInputError("probability row " + std::to_string(r) + " sums to " + io::format_double(sum));
    }
  }
}

Matrix64 cosine_logits(const Matrix& a, const Matrix& b, double temperature) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatchError("cosine_logits: dims " + std::to_string(a.cols()) + " and " +
                                 std::to_string(b.cols()));
  }
  if (!std::isfinite(temperature) || temperature < 0) throw InvalidInputError("temperature must be finite and >= 0");
  require_finite(a, "cosine_logits");
  require_finite(b, "cosine_logits");
  const Matrix an = l2_normalize_rows(a);
  const Matrix bn = l2_normalize_rows(b);
  const Matrix cos = matmul_a_bt(an, bn);
  Matrix64 logits(cos.rows(), cos.cols());
  for (std::size_t i = 0; i < cos.size(); ++i) logits.data()[i] = temperature * static_cast<double>(cos.data()[i]);
  return logits;
}

ProbabilityMatrix zero_shot_probs(const Matrix& images, const Matrix& text_embeddings, double temperature) {
  if (text_embeddings.rows() == 0) throw InvalidInputError("zero_shot_probs: no classes");
  ProbabilityMatrix out;
  out.probs = softmax(cosine_logits(images, text_embeddings, temperature));
  out.source = ProbSource::kZeroShot;
  out.temperature_used = temperature;
  return out;
}

ProbabilityMatrix zero_shot_probs(const EmbeddingTable& images, const ClassSpace& classes, double temperature) {
  if (!classes.text_embeddings) throw InvalidInputError("zero_shot_probs: class space has no text embeddings");
  if (classes.text_embeddings->rows() != classes.size()) {
    throw DimensionMismatchError("zero_shot_probs: text embedding rows != class count");
  }
  return zero_shot_probs(images.features, *classes.text_embeddings, temperature);
}

std::vector<double> row_confidences(const ProbabilityMatrix& probs) {
  std::vector<double> out(probs.rows());
  if (probs.cols() == 0) return out;
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = kernels::max(probs.probs.row(r).data(), probs.cols());
  return out;
}

LambdaEstimate estimate_lambda(const ProbabilityMatrix& probs) {
  if (probs.rows() == 0 || probs.cols() == 0) throw EmptyInputError("estimate_lambda: empty probability matrix");
  double sum = 0;
  for (double c : row_confidences(probs)) sum += c;
  LambdaEstimate est;
  est.num_items = probs.rows();
  est.value = sum / static_cast<double>(probs.rows());
  est.method = LambdaMethod::kAutoConfidence;
  return est;
}

ConfidenceHistogram histogram_of(const std::vector<double>& values, std::size_t num_bins) {
  if (num_bins == 0) throw InvalidInputError("histogram: num_bins must be >= 1");
  ConfidenceHistogram h;
  h.counts.assign(num_bins, 0);
  for (std::size_t b = 0; b < num_bins; ++b) {
    h.lo.push_back(static_cast<double>(b) / static_cast<double>(num_bins));
    h.hi.push_back(static_cast<double>(b + 1) / static_cast<double>(num_bins));
  }
  for (double v : values) {
    double scaled = std::floor(v * static_cast<double>(num_bins));
    if (scaled < 0) scaled = 0;
    std::size_t bin = static_cast<std::size_t>(scaled);
    if (bin >= num_bins) bin = num_bins - 1;
    // The stored edges are authoritative; v * n can round across one.
    if (bin + 1 < num_bins && v >= h.lo[bin + 1]) ++bin;
    if (bin > 0 && v < h.lo[bin]) --bin;
    ++h.counts[bin];
  }
  return h;
}

ConfidenceHistogram confidence_histogram(const ProbabilityMatrix& probs, std::size_t num_bins) {
  return histogram_of(row_confidences(probs), num_bins);
}

std::string histogram_csv(const ConfidenceHistogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out += io::format_double(h.lo[b]) + "," + io::format_double(h.hi[b]) + "," + std::to_string(h.counts[b]) + "\n";
  }
  return out;
}

}  // namespace svl
