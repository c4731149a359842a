#include "coda/embedding_io.hpp"

#include "coda/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace coda::io {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(in[offset + i])) << (8 * i));
  }
  return value;
}

constexpr std::size_t kHeaderSize = 4 + 1 + 8 + 4;

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "binary" || name == "bin") return Format::Binary;
  if (name == "csv") return Format::Csv;
  throw Error(ErrorCode::InvalidConfig, "unknown embedding format '" + name + "'");
}

EmbeddingSet EmbeddingSet::create(FloatMatrix vectors, std::vector<std::string> sample_ids,
                                  std::vector<int> labels) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (sample_ids.size() != n || labels.size() != n) {
    throw Error(ErrorCode::MissingLabels, "expected " + std::to_string(n) + " ids and labels, got " +
                                              std::to_string(sample_ids.size()) + " ids and " +
                                              std::to_string(labels.size()) + " labels");
  }
  if (!vectors.allFinite()) {
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      if (!vectors.row(r).allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(r) + " has a non-finite value");
      }
    }
  }
  std::unordered_set<std::string> seen;
  seen.reserve(n);
  for (const auto& id : sample_ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateSampleId, "duplicate sample id '" + id + "'");
  }
  EmbeddingSet set;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 1) {
      throw Error(ErrorCode::MissingLabels, "row " + std::to_string(i) + " has invalid class id " +
                                                std::to_string(labels[i]) + " (must be >= 1)");
    }
    set.class_index_[labels[i]].push_back(i);
  }
  set.vectors_ = std::move(vectors);
  set.sample_ids_ = std::move(sample_ids);
  set.labels_ = std::move(labels);
  return set;
}

std::vector<int> EmbeddingSet::classes() const {
  std::vector<int> out;
  out.reserve(class_index_.size());
  for (const auto& [label, rows] : class_index_) out.push_back(label);
  return out;
}

Matrix EmbeddingSet::rows(const IndexList& rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), vectors_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = vectors_.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
  }
  return out;
}

EmbeddingSet EmbeddingSet::subset(const IndexList& rows) const {
  FloatMatrix v(static_cast<Eigen::Index>(rows.size()), vectors_.cols());
  std::vector<std::string> ids;
  std::vector<int> labels;
  ids.reserve(rows.size());
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    v.row(static_cast<Eigen::Index>(i)) = vectors_.row(static_cast<Eigen::Index>(rows[i]));
    ids.push_back(sample_ids_[rows[i]]);
    labels.push_back(labels_[rows[i]]);
  }
  return create(std::move(v), std::move(ids), std::move(labels));
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.vectors_.rows() != b.vectors_.rows() || a.vectors_.cols() != b.vectors_.cols()) return false;
  const auto bytes = static_cast<std::size_t>(a.vectors_.size()) * sizeof(float);
  return std::memcmp(a.vectors_.data(), b.vectors_.data(), bytes) == 0 && a.sample_ids_ == b.sample_ids_ &&
         a.labels_ == b.labels_;
}

ClassView group_by_class(const EmbeddingSet& set, int label) {
  const auto it = set.class_index().find(label);
  if (it == set.class_index().end()) {
    throw Error(ErrorCode::UnknownClass, "class " + std::to_string(label) + " not present");
  }
  return ClassView{label, it->second};
}

std::filesystem::path default_labels_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".labels.json");
}

std::string encode_binary(const FloatMatrix& vectors) {
  std::string out;
  out.reserve(kHeaderSize + static_cast<std::size_t>(vectors.size()) * 4);
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kFormatVersion));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(vectors.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(vectors.cols()));
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(vectors(r, c)));
    }
  }
  return out;
}

FloatMatrix decode_binary(const std::string& bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::MalformedHeader, "missing CODA magic");
  }
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::MalformedHeader, "unsupported format version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes, 5);
  const auto d = get_le<std::uint32_t>(bytes, 13);
  if (d == 0 && n > 0) throw Error(ErrorCode::MalformedHeader, "zero dimension with non-empty payload");
  const std::size_t payload = bytes.size() - kHeaderSize;
  // Guard the multiplication before trusting the header.
  if (d != 0 && n > payload / (static_cast<std::size_t>(d) * 4)) {
    throw Error(ErrorCode::MalformedHeader, "header declares " + std::to_string(n) + " rows of dim " +
                                                std::to_string(d) + " but payload holds fewer");
  }
  if (payload != n * d * 4) {
    throw Error(ErrorCode::MalformedHeader, "payload size " + std::to_string(payload) +
                                                " does not match header (N=" + std::to_string(n) +
                                                ", D=" + std::to_string(d) + ")");
  }
  FloatMatrix vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::size_t offset = kHeaderSize;
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
      vectors(r, c) = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
      offset += 4;
    }
  }
  return vectors;
}

FloatMatrix parse_csv(const std::string& text) {
  std::vector<float> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      std::string_view cell(line.data() + pos, comma - pos);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      float value = 0.0f;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size()) {
        throw Error(ErrorCode::MalformedData, "line " + std::to_string(line_no) + ": cannot parse '" +
                                                  std::string(cell) + "'");
      }
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no) + ": non-finite value");
      }
      values.push_back(value);
      ++count;
      pos = comma + 1;
    }
    if (rows == 0) {
      dim = count;
    } else if (count != dim) {
      throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + " has " +
                                                    std::to_string(count) + " values, expected " +
                                                    std::to_string(dim));
    }
    ++rows;
  }
  FloatMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

std::string encode_labels(const EmbeddingSet& set) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < set.size(); ++i) {
    rows.push_back({{"row", i}, {"sample_id", set.sample_ids()[i]}, {"label", set.labels()[i]}});
  }
  nlohmann::json doc = {{"format", "coda-labels"}, {"version", 1}, {"rows", std::move(rows)}};
  return doc.dump(1) + "\n";
}

LabelSidecar decode_labels(const std::string& json_text, std::size_t expected_rows) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MissingLabels, std::string("label sidecar is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rows") || !doc["rows"].is_array()) {
    throw Error(ErrorCode::MissingLabels, "label sidecar has no 'rows' array");
  }
  LabelSidecar out;
  out.sample_ids.resize(expected_rows);
  out.labels.resize(expected_rows);
  std::vector<bool> seen(expected_rows, false);
  for (const auto& rec : doc["rows"]) {
    if (!rec.is_object() || !rec.contains("row") || !rec.contains("label") || !rec["row"].is_number_unsigned() ||
        !rec["label"].is_number_integer()) {
      throw Error(ErrorCode::MissingLabels, "label record must have integer 'row' and 'label'");
    }
    const auto row = rec["row"].get<std::size_t>();
    if (row >= expected_rows) {
      throw Error(ErrorCode::DimensionMismatch, "label record for row " + std::to_string(row) +
                                                    " but embeddings have " + std::to_string(expected_rows) +
                                                    " rows");
    }
    if (seen[row]) throw Error(ErrorCode::MissingLabels, "row " + std::to_string(row) + " labeled twice");
    seen[row] = true;
    out.labels[row] = rec["label"].get<int>();
    out.sample_ids[row] = rec.contains("sample_id") ? rec["sample_id"].get<std::string>() : std::to_string(row);
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw Error(ErrorCode::MissingLabels, "no label for row " + std::to_string(missing - seen.begin()));
  }
  return out;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, Format format,
                             std::optional<std::filesystem::path> labels_path) {
  const std::string bytes = read_file(path);
  FloatMatrix vectors = format == Format::Binary ? decode_binary(bytes) : parse_csv(bytes);
  const auto sidecar_path = labels_path.value_or(default_labels_path(path));
  if (!std::filesystem::exists(sidecar_path)) {
    throw Error(ErrorCode::MissingLabels, "label sidecar not found: " + sidecar_path.string());
  }
  auto sidecar = decode_labels(read_file(sidecar_path), static_cast<std::size_t>(vectors.rows()));
  return EmbeddingSet::create(std::move(vectors), std::move(sidecar.sample_ids), std::move(sidecar.labels));
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path, Format format,
                     std::optional<std::filesystem::path> labels_path) {
  if (format == Format::Binary) {
    write_file(path, encode_binary(set.vectors()));
  } else {
    std::string text;
    char buf[32];
    for (Eigen::Index r = 0; r < set.vectors().rows(); ++r) {
      for (Eigen::Index c = 0; c < set.vectors().cols(); ++c) {
        if (c > 0) text.push_back(',');
        // Shortest representation that round-trips the float exactly.
        const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), set.vectors()(r, c));
        text.append(buf, end);
      }
      text.push_back('\n');
    }
    write_file(path, text);
  }
  write_file(labels_path.value_or(default_labels_path(path)), encode_labels(set));
}

}  // namespace coda::io
