#include "svl/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <unordered_set>

#include "svl/error.hpp"
#include "svl/io.hpp"
#include "svl/rng.hpp"

namespace svl {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const unsigned char> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

void check_header(std::span<const unsigned char> bytes, const char (&magic)[8], std::size_t header_size,
                  const std::string& source) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 8) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, source + ": bad magic");
  }
  if (bytes.size() < header_size) {
    throw FormatError(FormatErrorKind::kTruncated, source + ": truncated header");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kFormatVersion) {
    throw FormatError(FormatErrorKind::kVersionMismatch,
                      source + ": format version " + std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  }
}

void check_payload_size(std::size_t have, std::size_t want, const std::string& source) {
  if (have < want) {
    throw FormatError(FormatErrorKind::kTruncated, source + ": payload has " + std::to_string(have) +
                                                       " bytes, expected " + std::to_string(want));
  }
  if (have > want) {
    throw FormatError(FormatErrorKind::kTrailingBytes,
                      source + ": " + std::to_string(have - want) + " unexpected trailing bytes");
  }
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".meta";
  return p;
}

bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw FormatError(FormatErrorKind::kSyntax, what + ": expected true/false, got '" + v + "'");
}

std::size_t parse_count(const std::string& v, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) {
    throw FormatError(FormatErrorKind::kSyntax, what + ": expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

std::vector<unsigned char> encode_matrix(const Matrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) throw ShapeError("matrix too large for file format");
  std::vector<unsigned char> out(kEmbeddingMagic, kEmbeddingMagic + 8);
  out.reserve(kEmbeddingHeaderSize + 4 * m.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.push_back(kDtypeFloat32);
  out.insert(out.end(), 3, 0);
  for (float v : m.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Matrix decode_matrix(std::span<const unsigned char> bytes, const std::string& source) {
  check_header(bytes, kEmbeddingMagic, kEmbeddingHeaderSize, source);
  const std::size_t rows = get_u32(bytes, 12);
  const std::size_t cols = get_u32(bytes, 16);
  const std::uint8_t dtype = bytes[20];
  if (dtype != kDtypeFloat32) {
    throw FormatError(FormatErrorKind::kUnknownDtype, source + ": unknown dtype " + std::to_string(dtype));
  }
  check_payload_size(bytes.size() - kEmbeddingHeaderSize, rows * cols * 4, source);
  std::vector<float> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kEmbeddingHeaderSize + 4 * i));
    if (!std::isfinite(data[i])) {
      throw FormatError(FormatErrorKind::kNonFinite, source + ": non-finite value at element " + std::to_string(i));
    }
  }
  return Matrix(rows, cols, std::move(data));
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, const MatrixMetadata& meta) {
  io::write_file_atomic(path, encode_matrix(m));
  if (!meta.empty()) {
    io::KeyValues kv{{"encoder_id", meta.encoder_id},
                     {"normalized", meta.normalized ? "true" : "false"},
                     {"dataset", meta.dataset}};
    io::write_file_atomic(meta_path(path), io::format_key_values(kv));
  }
}

MatrixFile read_matrix(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  MatrixFile out{decode_matrix(bytes, path.string()), {}};
  const auto mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    const io::KeyValues kv = io::read_key_values(mp);
    if (auto it = kv.find("encoder_id"); it != kv.end()) out.metadata.encoder_id = it->second;
    if (auto it = kv.find("dataset"); it != kv.end()) out.metadata.dataset = it->second;
    if (auto it = kv.find("normalized"); it != kv.end()) {
      out.metadata.normalized = parse_bool(it->second, mp.string());
    }
  }
  return out;
}

std::vector<unsigned char> encode_labels(std::span<const int> labels) {
  std::vector<unsigned char> out(kLabelMagic, kLabelMagic + 8);
  out.reserve(kLabelHeaderSize + 4 * labels.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (int v : labels) {
    if (v < 0) throw InvalidInputError("negative label cannot be encoded");
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  return out;
}

LabelVector decode_labels(std::span<const unsigned char> bytes, const std::string& source) {
  check_header(bytes, kLabelMagic, kLabelHeaderSize, source);
  const std::size_t count = get_u32(bytes, 12);
  check_payload_size(bytes.size() - kLabelHeaderSize, count * 4, source);
  LabelVector out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t v = get_u32(bytes, kLabelHeaderSize + 4 * i);
    if (v > static_cast<std::uint32_t>(INT32_MAX)) {
      throw InvalidLabelError(source + ": label " + std::to_string(v) + " at row " + std::to_string(i) +
                                  " is out of range",
                              i);
    }
    out[i] = static_cast<int>(v);
  }
  return out;
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
  io::write_file_atomic(path, encode_labels(labels));
}

LabelVector read_labels(const std::filesystem::path& path) {
  return decode_labels(io::read_file_bytes(path), path.string());
}

void validate_labels(std::span<const int> labels, std::size_t num_classes, const std::string& source) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw InvalidLabelError(source + ": label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                                  " outside [0, " + std::to_string(num_classes) + ")",
                              i);
    }
  }
}

void write_class_names(const std::filesystem::path& path, std::span<const std::string> names) {
  std::string text;
  for (const auto& n : names) {
    if (n.find('\n') != std::string::npos) throw InvalidInputError("class name contains a newline");
    text += n + "\n";
  }
  io::write_file_atomic(path, text);
}

std::vector<std::string> read_class_names(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::vector<std::string> names = io::split(text, '\n');
  if (!names.empty() && names.back().empty()) names.pop_back();
  for (auto& n : names) {
    if (!n.empty() && n.back() == '\r') n.pop_back();
  }
  return names;
}

FileKind sniff_file_kind(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kEmbeddingMagic, 8) == 0) return FileKind::kEmbeddings;
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kLabelMagic, 8) == 0) return FileKind::kLabels;
  return FileKind::kUnknown;
}

void EmbeddingTable::validate() const {
  if (ids.size() != features.rows()) {
    throw ShapeError("embedding table: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(features.rows()) + " rows");
  }
  if (normalized) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      double sq = 0;
      for (float v : features.row(r)) sq += static_cast<double>(v) * v;
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-4) {
        throw InvalidInputError("embedding table marked normalized but row " + std::to_string(r) +
                                " has norm " + std::to_string(std::sqrt(sq)));
      }
    }
  }
}

EmbeddingTable make_table(Matrix features, std::string encoder_id, bool normalized) {
  EmbeddingTable t;
  t.ids.reserve(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) t.ids.push_back(std::to_string(i));
  t.features = std::move(features);
  t.encoder_id = std::move(encoder_id);
  t.normalized = normalized;
  return t;
}

void ClassSpace::validate() const {
  if (names.empty()) throw InvalidInputError("class space has no classes");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw InvalidInputError("class " + std::to_string(i) + " has an empty name");
    if (!seen.insert(names[i]).second) throw InvalidInputError("duplicate class name '" + names[i] + "'");
  }
  if (text_embeddings && text_embeddings->rows() != names.size()) {
    throw DimensionMismatchError("class text embeddings have " + std::to_string(text_embeddings->rows()) +
                                 " rows for " + std::to_string(names.size()) + " classes");
  }
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

const std::string& require_key(const io::KeyValues& kv, const std::string& key, const std::string& source) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) {
    throw FormatError(FormatErrorKind::kSyntax, source + ": missing required key '" + key + "'");
  }
  return it->second;
}

std::optional<std::string> optional_key(const io::KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

EmbeddingTable load_table(const std::filesystem::path& path, std::size_t expected_dim, const std::string& encoder,
                          bool normalized, const std::optional<std::filesystem::path>& ids_path,
                          const std::string& what) {
  if (!std::filesystem::exists(path)) throw IoError(what + ": missing file " + path.string());
  MatrixFile mf = read_matrix(path);
  if (mf.matrix.cols() != expected_dim) {
    throw DimensionMismatchError(what + " (" + path.string() + ") has dim " + std::to_string(mf.matrix.cols()) +
                                 ", expected " + std::to_string(expected_dim));
  }
  EmbeddingTable t = make_table(std::move(mf.matrix),
                                mf.metadata.encoder_id.empty() ? encoder : mf.metadata.encoder_id,
                                normalized || mf.metadata.normalized);
  if (ids_path) {
    if (!std::filesystem::exists(*ids_path)) throw IoError(what + ": missing ids file " + ids_path->string());
    t.ids = read_class_names(*ids_path);
  }
  t.validate();
  return t;
}

Dataset load_dataset_impl(const std::filesystem::path& manifest_path, bool with_labels) {
  if (!std::filesystem::exists(manifest_path)) throw IoError("missing manifest " + manifest_path.string());
  const std::string src = manifest_path.string();
  const io::KeyValues kv = io::read_key_values(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();

  Dataset ds;
  ds.name = require_key(kv, "dataset", src);
  ds.dim = parse_count(require_key(kv, "dim", src), src + ": dim");
  ds.num_classes = parse_count(require_key(kv, "num_classes", src), src + ": num_classes");
  if (ds.dim == 0 || ds.num_classes == 0) throw FormatError(FormatErrorKind::kSyntax, src + ": dim and num_classes must be positive");
  const std::string encoder = optional_key(kv, "encoder").value_or("");
  const bool normalized = optional_key(kv, "normalized") ? parse_bool(kv.at("normalized"), src) : false;

  auto ids_for = [&](const std::string& key) -> std::optional<std::filesystem::path> {
    if (auto v = optional_key(kv, key)) return resolve(base, *v);
    return std::nullopt;
  };

  ds.train.features = load_table(resolve(base, require_key(kv, "train_embeddings", src)), ds.dim, encoder,
                                 normalized, ids_for("train_ids"), "train embeddings");
  ds.test.features = load_table(resolve(base, require_key(kv, "test_embeddings", src)), ds.dim, encoder,
                                normalized, ids_for("test_ids"), "test embeddings");

  if (auto train_ssl = optional_key(kv, "train_ssl_embeddings")) {
    const auto test_ssl = optional_key(kv, "test_ssl_embeddings");
    if (!test_ssl) throw FormatError(FormatErrorKind::kSyntax, src + ": train_ssl_embeddings without test_ssl_embeddings");
    const std::string ssl_encoder = optional_key(kv, "ssl_encoder").value_or("");
    const MatrixFile probe = read_matrix(resolve(base, *train_ssl));
    const std::size_t ssl_dim = optional_key(kv, "ssl_dim") ? parse_count(kv.at("ssl_dim"), src + ": ssl_dim")
                                                            : probe.matrix.cols();
    ds.train.ssl = load_table(resolve(base, *train_ssl), ssl_dim, ssl_encoder, false, ids_for("train_ids"),
                              "train ssl embeddings");
    ds.test.ssl = load_table(resolve(base, *test_ssl), ssl_dim, ssl_encoder, false, ids_for("test_ids"),
                             "test ssl embeddings");
    if (ds.train.ssl->size() != ds.train.features.size() || ds.test.ssl->size() != ds.test.features.size()) {
      throw ShapeError(src + ": ssl tables must have the same row counts as the image embedding tables");
    }
  }

  ds.classes.names = read_class_names([&] {
    auto p = resolve(base, require_key(kv, "class_names", src));
    if (!std::filesystem::exists(p)) throw IoError("missing class names file " + p.string());
    return p;
  }());
  if (ds.classes.names.size() != ds.num_classes) {
    throw DimensionMismatchError(src + ": class_names lists " + std::to_string(ds.classes.names.size()) +
                                 " classes, num_classes is " + std::to_string(ds.num_classes));
  }
  ds.classes.prompt_template = optional_key(kv, "prompt_template").value_or("");
  if (auto te = optional_key(kv, "class_text_embeddings")) {
    auto p = resolve(base, *te);
    if (!std::filesystem::exists(p)) throw IoError("missing class text embeddings " + p.string());
    Matrix w = read_matrix(p).matrix;
    if (w.cols() != ds.dim) {
      throw DimensionMismatchError("class text embeddings have dim " + std::to_string(w.cols()) + ", expected " +
                                   std::to_string(ds.dim));
    }
    ds.classes.text_embeddings = std::move(w);
  }
  ds.classes.validate();

  if (with_labels) {
    auto load_split_labels = [&](const std::string& key, const EmbeddingTable& table) {
      auto p = resolve(base, require_key(kv, key, src));
      if (!std::filesystem::exists(p)) throw IoError("missing label file " + p.string());
      LabelVector labels = read_labels(p);
      if (labels.size() != table.size()) {
        throw ShapeError(p.string() + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(table.size()) + " embeddings");
      }
      validate_labels(labels, ds.num_classes, p.string());
      return labels;
    };
    ds.train.labels = load_split_labels("train_labels", ds.train.features);
    ds.test.labels = load_split_labels("test_labels", ds.test.features);
  } else {
    require_key(kv, "train_labels", src);
    require_key(kv, "test_labels", src);
  }
  return ds;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) { return load_dataset_impl(manifest_path, true); }

Dataset load_dataset_unlabeled(const std::filesystem::path& manifest_path) {
  return load_dataset_impl(manifest_path, false);
}

std::vector<std::size_t> Episode::flat() const {
  std::vector<std::size_t> out;
  out.reserve(total());
  for (const auto& cls : selected) out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

std::size_t Episode::total() const {
  std::size_t n = 0;
  for (const auto& cls : selected) n += cls.size();
  return n;
}

namespace {

constexpr std::uint64_t kTrainSalt = 0x7452;
constexpr std::uint64_t kValidationSalt = 0x5641;

std::vector<std::vector<std::size_t>> items_by_class(std::span<const int> labels, std::size_t num_classes) {
  validate_labels(labels, num_classes);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

// Partial Fisher-Yates: the first `take` entries of a uniformly shuffled pool.
std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t take, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace

Episode sample_episode(std::span<const int> labels, std::size_t num_classes, std::size_t shots, std::uint64_t seed) {
  if (shots == 0) throw InvalidInputError("sample_episode: shots must be >= 1");
  auto by_class = items_by_class(labels, num_classes);
  Episode ep;
  ep.shots = shots;
  ep.seed = seed;
  ep.selected.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class[c].empty()) {
      throw MissingClassError("sample_episode: class " + std::to_string(c) + " has no items", static_cast<int>(c));
    }
    std::size_t take = shots;
    if (by_class[c].size() < shots) {
      take = by_class[c].size();
      ep.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(take) + " items, fewer than " +
                            std::to_string(shots) + " shots; using all of them");
    }
    ep.selected[c] = draw(std::move(by_class[c]), take, derive_seed(seed, c, kTrainSalt));
  }
  return ep;
}

std::size_t validation_size(std::size_t shots) { return shots <= 2 ? shots : 4; }

Episode split_validation(std::span<const int> labels, std::size_t num_classes, const Episode& train,
                         std::uint64_t seed) {
  if (train.selected.size() != num_classes) throw ShapeError("split_validation: episode class count mismatch");
  auto by_class = items_by_class(labels, num_classes);
  Episode val;
  val.shots = validation_size(train.shots);
  val.seed = seed;
  val.selected.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::set<std::size_t> used(train.selected[c].begin(), train.selected[c].end());
    std::vector<std::size_t> pool;
    for (std::size_t i : by_class[c]) {
      if (!used.count(i)) pool.push_back(i);
    }
    std::size_t take = val.shots;
    if (pool.size() < take) {
      take = pool.size();
      val.warnings.push_back("class " + std::to_string(c) + " has only " + std::to_string(take) +
                             " items left for validation, wanted " + std::to_string(val.shots));
    }
    val.selected[c] = draw(std::move(pool), take, derive_seed(seed, c, kValidationSalt));
  }
  return val;
}

}  // namespace svl
