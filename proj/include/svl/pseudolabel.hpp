#pragma once

#include <span>
#include <string>
#include <vector>

#include "svl/adapters.hpp"
#include "svl/embedding_store.hpp"
#include "svl/fusion.hpp"
#include "svl/protocol.hpp"
#include "svl/zeroshot.hpp"

namespace svl {

struct PseudoLabel {
  std::size_t item = 0;
  int label = 0;          // the item's zero-shot argmax
  double confidence = 0;  // the row maximum
  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

struct PseudoLabelSet {
  std::size_t k = 0;
  std::vector<std::vector<PseudoLabel>> by_class;  // descending confidence, ascending item on ties
  std::vector<int> empty_classes;                  // classes no item was predicted as

  std::vector<PseudoLabel> flat() const;
  std::size_t total() const;
};

/// Per predicted class, the k items with the highest confidence.
PseudoLabelSet select_pseudolabels(const ProbabilityMatrix& probs, std::size_t k = protocol::kPseudoLabelsPerClass);

/// "item_id,pseudo_label,confidence" header plus one line per selection.
/// `ids` maps item indices to identifiers; row indices are used when empty.
std::string pseudolabels_csv(const PseudoLabelSet& set, std::span<const std::string> ids = {});

struct ZeroShotAdaptResult {
  FusionResult fusion;  // lambda = estimate_lambda(clip_probs)
  PseudoLabelSet pseudo_labels;
  AdapterParams adapter;
  TrainTrace trace;
};

/// Trains the self-supervised adapter on the most confident zero-shot
/// pseudolabels and fuses its predictions with the zero-shot ones, using the
/// average zero-shot confidence as the blending weight. Takes no ground truth.
ZeroShotAdaptResult zero_shot_adapt(const EmbeddingTable& features, const ProbabilityMatrix& clip_probs,
                                    std::size_t k, const TrainConfig& cfg);

}  // namespace svl
