#pragma once

// On-disk formats and few-shot episode construction.
//
// Embedding file (all integers little-endian):
//   0..7    magic "SVLEMB1\0"
//   8..11   format version, u32 (= 1)
//   12..15  rows, u32
//   16..19  cols, u32
//   20      dtype (1 = float32)
//   21..23  zero padding
//   24..    rows*cols float32, row-major
//
// Label file: magic "SVLLAB1\0", version u32 (= 1), count u32, then count
// u32 class indices.
//
// Class-name file: UTF-8, one name per line; the line number is the index.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svl/matrix.hpp"

namespace svl {

inline constexpr char kEmbeddingMagic[8] = {'S', 'V', 'L', 'E', 'M', 'B', '1', '\0'};
inline constexpr char kLabelMagic[8] = {'S', 'V', 'L', 'L', 'A', 'B', '1', '\0'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 24;
inline constexpr std::size_t kLabelHeaderSize = 16;

/// Provenance carried next to a matrix file in "<path>.meta" (key=value).
struct MatrixMetadata {
  std::string encoder_id;
  bool normalized = false;
  std::string dataset;

  bool empty() const { return encoder_id.empty() && !normalized && dataset.empty(); }
  friend bool operator==(const MatrixMetadata&, const MatrixMetadata&) = default;
};

struct MatrixFile {
  Matrix matrix;
  MatrixMetadata metadata;
};

std::vector<unsigned char> encode_matrix(const Matrix& m);
/// Throws FormatError with a distinct kind for bad magic, version mismatch,
/// truncation, trailing bytes, unknown dtype and non-finite payload.
Matrix decode_matrix(std::span<const unsigned char> bytes, const std::string& source = "<memory>");

void write_matrix(const std::filesystem::path& path, const Matrix& m, const MatrixMetadata& meta = {});
MatrixFile read_matrix(const std::filesystem::path& path);

using LabelVector = std::vector<int>;

std::vector<unsigned char> encode_labels(std::span<const int> labels);
LabelVector decode_labels(std::span<const unsigned char> bytes, const std::string& source = "<memory>");
void write_labels(const std::filesystem::path& path, std::span<const int> labels);
LabelVector read_labels(const std::filesystem::path& path);

/// Throws InvalidLabelError naming the first row outside [0, num_classes).
void validate_labels(std::span<const int> labels, std::size_t num_classes, const std::string& source = "labels");

void write_class_names(const std::filesystem::path& path, std::span<const std::string> names);
std::vector<std::string> read_class_names(const std::filesystem::path& path);

enum class FileKind { kEmbeddings, kLabels, kUnknown };
/// Classifies a file by its first eight bytes.
FileKind sniff_file_kind(const std::filesystem::path& path);

struct EmbeddingTable {
  std::vector<std::string> ids;
  Matrix features;
  std::string encoder_id;
  bool normalized = false;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  /// Checks ids length and, when `normalized` is set, unit row norms (1e-4).
  void validate() const;
};

/// Table whose ids are the decimal row indices.
EmbeddingTable make_table(Matrix features, std::string encoder_id = {}, bool normalized = false);

struct ClassSpace {
  std::vector<std::string> names;
  std::optional<Matrix> text_embeddings;  // K x D
  std::string prompt_template;

  std::size_t size() const { return names.size(); }
  /// Names nonempty and unique; text embedding row count equals K.
  void validate() const;
};

struct LabeledSplit {
  EmbeddingTable features;             // vision-language image embeddings
  std::optional<EmbeddingTable> ssl;   // self-supervised encoder features
  LabelVector labels;

  /// Features the adapter trains on: the self-supervised table when present.
  const EmbeddingTable& adapter_features() const { return ssl ? *ssl : features; }
};

struct Dataset {
  std::string name;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  LabeledSplit train;
  LabeledSplit test;
  ClassSpace classes;
};

/// Manifest keys. Required: dataset, dim, num_classes, train_embeddings,
/// train_labels, test_embeddings, test_labels, class_names. Optional:
/// class_text_embeddings, encoder, normalized, prompt_template,
/// train_ssl_embeddings, test_ssl_embeddings, ssl_encoder, train_ids,
/// test_ids. Relative paths resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Loads the manifest's tables without reading the label files.
Dataset load_dataset_unlabeled(const std::filesystem::path& manifest_path);

struct Episode {
  std::size_t shots = 0;
  std::vector<std::vector<std::size_t>> selected;  // per class, item indices
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  /// All indices, class by class.
  std::vector<std::size_t> flat() const;
  std::size_t total() const;
};

/// Seeded per-class sampling without replacement. Each class draws from its
/// own stream derived from (seed, class), so one class's sample does not
/// depend on the others. Classes with fewer than `shots` items are clamped
/// with a warning; a class with no items is an error.
Episode sample_episode(std::span<const int> labels, std::size_t num_classes, std::size_t shots,
                       std::uint64_t seed);

/// Per-class validation size for the lambda sweep: 1 for one shot, 2 for two
/// shots, 4 otherwise.
std::size_t validation_size(std::size_t shots);

/// Draws validation items from the items not used by `train`, per class.
Episode split_validation(std::span<const int> labels, std::size_t num_classes, const Episode& train,
                         std::uint64_t seed);

}  // namespace svl
