#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "svl/embedding_store.hpp"
#include "svl/io.hpp"
#include "svl/matrix.hpp"
#include "svl/rng.hpp"
#include "svl/zeroshot.hpp"

namespace svl::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("svl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(scale * rng.normal());
  return m;
}

inline Matrix64 random_matrix64(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix64 m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<int> out(n);
  for (int& y : out) y = static_cast<int>(rng.uniform_index(k));
  return out;
}

/// Random row-stochastic matrix. `sharpness` scales the logits, so large
/// values give near one-hot rows.
inline ProbabilityMatrix random_probs(std::size_t rows, std::size_t cols, Rng& rng, double sharpness = 3.0) {
  ProbabilityMatrix p;
  p.probs = Matrix64(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = p.probs.row(r);
    double sum = 0;
    for (double& v : row) {
      v = std::exp(sharpness * rng.normal());
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return p;
}

inline ProbabilityMatrix uniform_probs(std::size_t rows, std::size_t cols) {
  ProbabilityMatrix p;
  p.probs = Matrix64(rows, cols, 1.0 / static_cast<double>(cols));
  return p;
}

inline ProbabilityMatrix probs_from_rows(const std::vector<std::vector<double>>& rows) {
  ProbabilityMatrix p;
  p.probs = Matrix64(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) p.probs(r, c) = rows[r][c];
  }
  return p;
}

/// Isotropic Gaussian clusters. Class means sit on scaled coordinate axes so
/// every pair of means is `separation` standard deviations apart.
struct Clusters {
  std::size_t num_classes = 0;
  Matrix means;  // K x D
  Matrix train;
  std::vector<int> train_labels;
  Matrix test;
  std::vector<int> test_labels;
};

inline Clusters make_clusters(std::size_t num_classes, std::size_t dim, double separation, std::size_t train_per_class,
                              std::size_t test_per_class, std::uint64_t seed) {
  Clusters c;
  c.num_classes = num_classes;
  c.means = Matrix(num_classes, dim);
  const double offset = separation / std::sqrt(2.0);
  for (std::size_t k = 0; k < num_classes; ++k) c.means(k, k % dim) = static_cast<float>(offset);
  Rng rng(seed);
  auto draw = [&](std::size_t per_class, Matrix& x, std::vector<int>& y) {
    x = Matrix(num_classes * per_class, dim);
    y.clear();
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t k = 0; k < num_classes; ++k) {
        const std::size_t r = y.size();
        for (std::size_t d = 0; d < dim; ++d) x(r, d) = c.means(k, d) + static_cast<float>(rng.normal());
        y.push_back(static_cast<int>(k));
      }
    }
  };
  draw(train_per_class, c.train, c.train_labels);
  draw(test_per_class, c.test, c.test_labels);
  return c;
}

/// Writes a complete manifest plus data files for `c`, using the class means
/// as class text embeddings. Returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const Clusters& c,
                                           const std::string& name = "synthetic") {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "train.svlemb", c.train, {"synthetic-image", false, name});
  write_labels(dir / "train.svllab", c.train_labels);
  write_matrix(dir / "test.svlemb", c.test, {"synthetic-image", false, name});
  write_labels(dir / "test.svllab", c.test_labels);
  write_matrix(dir / "text.svlemb", c.means, {"synthetic-text", false, name});
  std::vector<std::string> names;
  for (std::size_t k = 0; k < c.num_classes; ++k) names.push_back("class_" + std::to_string(k));
  write_class_names(dir / "classes.txt", names);
  io::KeyValues kv{{"dataset", name},
                   {"dim", std::to_string(c.means.cols())},
                   {"num_classes", std::to_string(c.num_classes)},
                   {"train_embeddings", "train.svlemb"},
                   {"train_labels", "train.svllab"},
                   {"test_embeddings", "test.svlemb"},
                   {"test_labels", "test.svllab"},
                   {"class_names", "classes.txt"},
                   {"class_text_embeddings", "text.svlemb"},
                   {"encoder", "synthetic-image"},
                   {"normalized", "false"}};
  io::write_file_atomic(dir / "manifest.txt", io::format_key_values(kv));
  return dir / "manifest.txt";
}

inline std::string read_text(const std::filesystem::path& p) {
  const auto bytes = io::read_file_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace svl::testing
