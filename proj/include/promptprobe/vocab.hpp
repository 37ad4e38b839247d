#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "promptprobe/dataio.hpp"

namespace promptprobe {

// Lowercased maximal runs of ASCII letters; every other byte separates.
// Shared by vocabulary building and labeling so the two always agree.
std::vector<std::string> tokenize(std::string_view text);

// Default function-word list standing in for a part-of-speech filter.
const std::unordered_set<std::string>& default_stopwords();

// Optional hook for a real part-of-speech tagger: return false to reject a
// token as a vocabulary candidate.
using TokenFilter = std::function<bool(std::string_view)>;

inline constexpr std::size_t kMinTokenLength = 3;

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t j) const { return tokens_[j]; }

  // Position of token, or size() if absent.
  std::size_t index_of(std::string_view token) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Top-m eligible tokens by corpus frequency (all occurrences counted),
// ties broken lexicographically. Eligible: not a stopword, at least three
// characters, and accepted by `filter` when one is given.
Vocabulary build_vocabulary(const std::vector<PromptRecord>& prompts, std::size_t m,
                            const std::unordered_set<std::string>& stopwords,
                            const TokenFilter& filter = {});

// Row-major packed binary matrix.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool get(std::size_t i, std::size_t j) const {
    return (bits_[i * words_per_row_ + j / 64] >> (j % 64)) & 1u;
  }
  void set(std::size_t i, std::size_t j, bool value);

  std::vector<std::uint8_t> row(std::size_t i) const;
  std::size_t column_sum(std::size_t j) const;

  // 0/1 entries widened to double, for the training loop.
  Eigen::MatrixXd to_eigen() const;

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Entry j is 1 iff vocabulary token j occurs as a whole token of the prompt.
std::vector<std::uint8_t> make_label_vector(const PromptRecord& prompt, const Vocabulary& v);
LabelMatrix make_label_matrix(const std::vector<PromptRecord>& prompts, const Vocabulary& v);

}  // namespace promptprobe
