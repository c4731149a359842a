#pragma once

#include "coda/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coda::io {

enum class Format { Binary, Csv };

Format parse_format(const std::string& name);

/// Per-row feature vectors with stable identifiers and class labels.
/// Immutable once built; `create` is the only way to obtain a validated set.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Validates and indexes. Labels must be positive class ids, ids unique,
  /// values finite.
  static EmbeddingSet create(FloatMatrix vectors, std::vector<std::string> sample_ids,
                             std::vector<int> labels);

  std::size_t size() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }

  const FloatMatrix& vectors() const noexcept { return vectors_; }
  const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::map<int, IndexList>& class_index() const noexcept { return class_index_; }

  /// Class ids in ascending order.
  std::vector<int> classes() const;

  /// Rows widened to double precision.
  Matrix to_matrix() const { return vectors_.cast<double>(); }
  Matrix rows(const IndexList& rows) const;

  /// New set holding only the given rows (in the given order).
  EmbeddingSet subset(const IndexList& rows) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

 private:
  FloatMatrix vectors_;
  std::vector<std::string> sample_ids_;
  std::vector<int> labels_;
  std::map<int, IndexList> class_index_;
};

/// Rows of one class, in ascending row order.
struct ClassView {
  int label = 0;
  IndexList rows;
};

ClassView group_by_class(const EmbeddingSet& set, int label);

/// `<path>.labels.json`
std::filesystem::path default_labels_path(const std::filesystem::path& path);

EmbeddingSet load_embeddings(const std::filesystem::path& path, Format format,
                             std::optional<std::filesystem::path> labels_path = std::nullopt);

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     Format format = Format::Binary,
                     std::optional<std::filesystem::path> labels_path = std::nullopt);

// Lower-level pieces, exposed for tests and tools.

inline constexpr char kMagic[4] = {'C', 'O', 'D', 'A'};
inline constexpr std::uint8_t kFormatVersion = 1;

std::string encode_binary(const FloatMatrix& vectors);
FloatMatrix decode_binary(const std::string& bytes);

FloatMatrix parse_csv(const std::string& text);

struct LabelSidecar {
  std::vector<std::string> sample_ids;
  std::vector<int> labels;
};

std::string encode_labels(const EmbeddingSet& set);
LabelSidecar decode_labels(const std::string& json_text, std::size_t expected_rows);

}  // namespace coda::io
