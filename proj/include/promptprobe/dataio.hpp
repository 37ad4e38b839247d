#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace promptprobe {

struct PromptRecord {
  std::uint64_t id = 0;
  std::string text;

  bool operator==(const PromptRecord&) const = default;
};

// Dense row-major float32 matrix with one identifier per row. Holds image
// features or target sentence embeddings. Construction validates shape,
// id uniqueness and finiteness, so every live instance satisfies them.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data,
                std::vector<std::uint64_t> row_ids);

  // Rows get ids 0..rows-1.
  static FeatureMatrix from_eigen(const Eigen::MatrixXd& values);
  static FeatureMatrix from_eigen(const Eigen::MatrixXd& values,
                                  std::vector<std::uint64_t> row_ids);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<float>& data() const { return data_; }
  const std::vector<std::uint64_t>& row_ids() const { return row_ids_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  float at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  // Widened copy for numerical work.
  Eigen::MatrixXd to_eigen() const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
  std::vector<std::uint64_t> row_ids_;
};

struct FilterReport {
  std::size_t input = 0;
  std::size_t trimmed = 0;  // records modified by whitespace trimming (not drops)
  std::size_t dropped_empty = 0;
  std::size_t dropped_null_nan = 0;
  std::size_t dropped_non_english = 0;
  std::size_t dropped_duplicate = 0;
  std::size_t kept = 0;

  std::size_t total_dropped() const {
    return dropped_empty + dropped_null_nan + dropped_non_english + dropped_duplicate;
  }
};

struct FilterResult {
  std::vector<PromptRecord> kept;
  FilterReport report;
};

// Characters compared at each end of a prompt when detecting near-duplicates.
inline constexpr std::size_t kDedupWindow = 50;

// Successive prompt-cleaning steps, in order:
//   (i)   trim leading/trailing whitespace,
//   (ii)  drop prompts with no words or with a "Null"/"NaN" word,
//   (iii) drop prompts with any byte outside printable ASCII,
//   (iv)  drop prompts whose first or last 50 characters match an earlier
//         kept prompt (shorter prompts: whole-string match).
// The first occurrence of a duplicate group survives. Comparison is
// case-sensitive.
FilterResult filter_prompts(const std::vector<PromptRecord>& records);

// FMAT v1: "FMAT", u32 version, u32 rows, u32 cols, rows*cols f32, rows u64
// ids; all little-endian.
FeatureMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

struct DatasetSplit {
  std::vector<std::uint64_t> train_ids;
  std::vector<std::uint64_t> val_ids;
  std::vector<std::uint64_t> test_ids;
};

// Seeded shuffle, then floor-allocated validation and test sizes; the
// remainder goes to training.
DatasetSplit split_dataset(const std::vector<std::uint64_t>& ids,
                           SplitFractions fractions, std::uint64_t seed);

// JSON-lines corpus, one {"id": <uint>, "prompt": <string>} per line. Blank
// lines are skipped; anything else malformed raises FormatError with the
// 1-based line number.
std::vector<PromptRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::vector<PromptRecord>& records,
                  const std::filesystem::path& path);

}  // namespace promptprobe
