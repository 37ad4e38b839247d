#include "promptprobe/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

constexpr std::string_view kMatrixMagic = "FMAT";
constexpr std::uint32_t kMatrixVersion = 1;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool has_null_or_nan_word(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    const auto word = s.substr(i, j - i);
    if (word == "Null" || word == "NaN") return true;
    i = j;
  }
  return false;
}

bool is_printable_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x20 && u <= 0x7E;
  });
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data,
                             std::vector<std::uint64_t> row_ids)
    : rows_(rows), cols_(cols), data_(std::move(data)), row_ids_(std::move(row_ids)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix payload has " + std::to_string(data_.size()) +
                     " values, expected " + std::to_string(rows_ * cols_));
  }
  if (row_ids_.size() != rows_) {
    throw ShapeError("matrix has " + std::to_string(rows_) + " rows but " +
                     std::to_string(row_ids_.size()) + " row ids");
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(rows_);
  for (auto id : row_ids_) {
    if (!seen.insert(id).second) throw DataError("duplicate row id " + std::to_string(id));
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      if (!std::isfinite(data_[i * cols_ + j])) {
        throw DataError("non-finite value at row " + std::to_string(i) + " (id " +
                        std::to_string(row_ids_[i]) + "), column " + std::to_string(j));
      }
    }
  }
}

FeatureMatrix FeatureMatrix::from_eigen(const Eigen::MatrixXd& values) {
  std::vector<std::uint64_t> ids(static_cast<std::size_t>(values.rows()));
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  return from_eigen(values, std::move(ids));
}

FeatureMatrix FeatureMatrix::from_eigen(const Eigen::MatrixXd& values,
                                        std::vector<std::uint64_t> row_ids) {
  const auto rows = static_cast<std::size_t>(values.rows());
  const auto cols = static_cast<std::size_t>(values.cols());
  std::vector<float> data(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      data[i * cols + j] = static_cast<float>(values(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(j)));
    }
  }
  return FeatureMatrix(rows, cols, std::move(data), std::move(row_ids));
}

Eigen::MatrixXd FeatureMatrix::to_eigen() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data_[i * cols_ + j];
    }
  }
  return out;
}

FilterResult filter_prompts(const std::vector<PromptRecord>& records) {
  FilterResult result;
  auto& report = result.report;
  report.input = records.size();

  std::unordered_set<std::string> kept_prefixes;
  std::unordered_set<std::string> kept_suffixes;
  std::unordered_set<std::string> kept_short;

  for (const auto& record : records) {
    const std::string_view trimmed = trim(record.text);
    if (trimmed.size() != record.text.size()) ++report.trimmed;

    if (trimmed.empty()) {
      ++report.dropped_empty;
      continue;
    }
    if (has_null_or_nan_word(trimmed)) {
      ++report.dropped_null_nan;
      continue;
    }
    if (!is_printable_ascii(trimmed)) {
      ++report.dropped_non_english;
      continue;
    }

    std::string text(trimmed);
    if (text.size() >= kDedupWindow) {
      std::string prefix = text.substr(0, kDedupWindow);
      std::string suffix = text.substr(text.size() - kDedupWindow);
      if (kept_prefixes.contains(prefix) || kept_suffixes.contains(suffix)) {
        ++report.dropped_duplicate;
        continue;
      }
      kept_prefixes.insert(std::move(prefix));
      kept_suffixes.insert(std::move(suffix));
    } else {
      if (!kept_short.insert(text).second) {
        ++report.dropped_duplicate;
        continue;
      }
    }
    result.kept.push_back({record.id, std::move(text)});
  }
  report.kept = result.kept.size();
  return result;
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  std::string magic;
  try {
    magic = in.bytes(kMatrixMagic.size());
  } catch (const LengthError&) {
    throw FormatError("'" + path.string() + "' is too short to be an FMAT file");
  }
  if (magic != kMatrixMagic) throw FormatError("'" + path.string() + "' has bad FMAT magic");
  std::uint32_t version = 0, rows = 0, cols = 0;
  try {
    version = in.u32();
    rows = in.u32();
    cols = in.u32();
  } catch (const LengthError&) {
    throw FormatError("'" + path.string() + "' has a truncated FMAT header");
  }
  if (version != kMatrixVersion) {
    throw FormatError("'" + path.string() + "' has unsupported FMAT version " +
                      std::to_string(version));
  }

  const std::uint64_t count = std::uint64_t{rows} * cols;
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  const std::uint64_t expected = 16 + count * 4 + std::uint64_t{rows} * 8;
  if (!ec && file_size < expected) {
    throw LengthError("'" + path.string() + "' payload truncated: " + std::to_string(file_size) +
                      " bytes, header implies " + std::to_string(expected));
  }

  std::vector<float> data(count);
  for (auto& v : data) v = in.f32();
  std::vector<std::uint64_t> ids(rows);
  for (auto& id : ids) id = in.u64();
  if (!in.at_end()) throw FormatError("'" + path.string() + "' has trailing bytes after payload");

  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!std::isfinite(data[i * cols + j])) {
        throw DataError("'" + path.string() + "': non-finite value at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
    }
  }
  return FeatureMatrix(rows, cols, std::move(data), std::move(ids));
}

void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) {
    throw InvalidArgument("matrix too large for FMAT v1");
  }
  detail::BinaryWriter out(path);
  out.bytes(kMatrixMagic);
  out.u32(kMatrixVersion);
  out.u32(static_cast<std::uint32_t>(m.rows()));
  out.u32(static_cast<std::uint32_t>(m.cols()));
  for (float v : m.data()) out.f32(v);
  for (auto id : m.row_ids()) out.u64(id);
  out.finish();
}

DatasetSplit split_dataset(const std::vector<std::uint64_t>& ids, SplitFractions fractions,
                           std::uint64_t seed) {
  if (ids.empty()) throw InvalidArgument("cannot split an empty id list");
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0)) {
    throw InvalidArgument("split fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1");
  }

  std::vector<std::uint64_t> order = ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // The small slack keeps products such as 730000 * (30/730) from flooring
  // one below the intended integer.
  const auto n = static_cast<double>(order.size());
  const auto n_val = static_cast<std::size_t>(std::floor(n * fractions.val + 1e-6));
  const auto n_test = static_cast<std::size_t>(std::floor(n * fractions.test + 1e-6));
  const std::size_t n_train = order.size() - n_val - n_test;

  DatasetSplit split;
  split.train_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                       order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

std::vector<PromptRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  std::vector<PromptRecord> records;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw FormatError(where + ": not valid JSON");
    }
    if (!obj.is_object()) throw FormatError(where + ": expected a JSON object");
    const auto id_it = obj.find("id");
    const auto text_it = obj.find("prompt");
    if (id_it == obj.end() || !id_it->is_number_unsigned()) {
      throw FormatError(where + ": missing or non-integer \"id\"");
    }
    if (text_it == obj.end() || !text_it->is_string()) {
      throw FormatError(where + ": missing or non-string \"prompt\"");
    }
    PromptRecord record{id_it->get<std::uint64_t>(), text_it->get<std::string>()};
    if (!seen.insert(record.id).second) {
      throw DataError(where + ": duplicate id " + std::to_string(record.id));
    }
    records.push_back(std::move(record));
  }
  return records;
}

void write_corpus(const std::vector<PromptRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& r : records) {
    // Replacement keeps output valid JSON even for prompts that are not UTF-8.
    out << nlohmann::json{{"id", r.id}, {"prompt", r.text}}.dump(
               -1, ' ', false, nlohmann::json::error_handler_t::replace)
        << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace promptprobe
