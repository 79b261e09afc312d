#include "svl/pseudolabel.hpp"

#include <algorithm>
#include <queue>

#include "svl/error.hpp"
#include "svl/io.hpp"
#include "svl/numerics.hpp"

namespace svl {
namespace {

bool ranks_before(const PseudoLabel& a, const PseudoLabel& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return a.item < b.item;
}

struct RanksBefore {
  bool operator()(const PseudoLabel& a, const PseudoLabel& b) const { return ranks_before(a, b); }
};

}  // namespace

std::vector<PseudoLabel> PseudoLabelSet::flat() const {
  std::vector<PseudoLabel> out;
  for (const auto& cls : by_class) out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

std::size_t PseudoLabelSet::total() const {
  std::size_t n = 0;
  for (const auto& cls : by_class) n += cls.size();
  return n;
}

PseudoLabelSet select_pseudolabels(const ProbabilityMatrix& probs, std::size_t k) {
  if (k == 0) throw InvalidInputError("select_pseudolabels: k must be >= 1");
  const std::size_t num_classes = probs.cols();
  // One bounded heap per class; the top is the current worst keeper.
  std::vector<std::priority_queue<PseudoLabel, std::vector<PseudoLabel>, RanksBefore>> heaps(num_classes);
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.probs.row(r);
    const std::size_t c = argmax(row);
    auto& heap = heaps[c];
    PseudoLabel cand{r, static_cast<int>(c), row[c]};
    if (heap.size() < k) {
      heap.push(cand);
    } else if (ranks_before(cand, heap.top())) {
      heap.pop();
      heap.push(cand);
    }
  }

  PseudoLabelSet out;
  out.k = k;
  out.by_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& heap = heaps[c];
    auto& dst = out.by_class[c];
    dst.reserve(heap.size());
    while (!heap.empty()) {
      dst.push_back(heap.top());
      heap.pop();
    }
    std::reverse(dst.begin(), dst.end());
    if (dst.empty()) out.empty_classes.push_back(static_cast<int>(c));
  }
  return out;
}

std::string pseudolabels_csv(const PseudoLabelSet& set, std::span<const std::string> ids) {
  std::string out = "item_id,pseudo_label,confidence\n";
  for (const PseudoLabel& p : set.flat()) {
    const std::string id = p.item < ids.size() ? ids[p.item] : std::to_string(p.item);
    out += id + "," + std::to_string(p.label) + "," + io::format_double(p.confidence) + "\n";
  }
  return out;
}

ZeroShotAdaptResult zero_shot_adapt(const EmbeddingTable& features, const ProbabilityMatrix& clip_probs,
                                    std::size_t k, const TrainConfig& cfg) {
  if (features.size() != clip_probs.rows()) {
    throw ShapeError("zero_shot_adapt: " + std::to_string(features.size()) + " feature rows, " +
                     std::to_string(clip_probs.rows()) + " probability rows");
  }
  if (clip_probs.cols() == 0) throw InvalidInputError("zero_shot_adapt: no classes");
  clip_probs.validate();

  ZeroShotAdaptResult out;
  out.pseudo_labels = select_pseudolabels(clip_probs, k);
  if (out.pseudo_labels.total() == 0) throw CannotAdaptError("zero_shot_adapt: no pseudolabels were selected");

  const std::vector<PseudoLabel> picks = out.pseudo_labels.flat();
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (const PseudoLabel& p : picks) {
    rows.push_back(p.item);
    labels.push_back(p.label);
  }
  const Matrix train_x = features.features.select_rows(rows);
  TrainedAdapter trained = train_svl_adapter(train_x, labels, clip_probs.cols(), cfg, features.encoder_id);

  const ProbabilityMatrix ps = predict_svl_adapter(trained.params, features.features);
  out.fusion = fuse_predictions(clip_probs, ps, estimate_lambda(clip_probs));
  out.adapter = std::move(trained.params);
  out.trace = std::move(trained.trace);
  return out;
}

}  // namespace svl
