#include "promptprobe/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "promptprobe/error.hpp"

namespace promptprobe {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      current.push_back(static_cast<char>(c | 0x20));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

const std::unordered_set<std::string>& default_stopwords() {
  // Determiners, pronouns, prepositions, conjunctions, auxiliaries and a few
  // high-frequency adverbs. Words under three letters are dropped by length.
  static const std::unordered_set<std::string> words = {
      "the", "and", "for", "with", "from", "into", "onto", "upon", "over", "under", "above",
      "below", "between", "among", "through", "during", "before", "after", "about", "against",
      "around", "behind", "beside", "besides", "beyond", "within", "without", "across", "along",
      "toward", "towards", "near", "off", "out", "via", "per", "than", "then", "that", "this",
      "these", "those", "there", "here", "where", "when", "what", "which", "who", "whom",
      "whose", "why", "how", "while", "whilst", "because", "though", "although", "unless",
      "until", "since", "but", "nor", "yet", "either", "neither", "both", "each", "every",
      "all", "any", "some", "such", "few", "many", "much", "more", "most", "less", "least",
      "other", "another", "own", "same", "not", "only", "very", "too", "also", "just", "even",
      "ever", "still", "again", "once", "its", "his", "her", "hers", "him", "she", "they",
      "them", "their", "theirs", "our", "ours", "you", "your", "yours", "mine", "myself",
      "yourself", "himself", "herself", "itself", "ourselves", "themselves", "are", "was",
      "were", "been", "being", "has", "have", "had", "having", "does", "did", "doing", "done",
      "can", "could", "will", "would", "shall", "should", "may", "might", "must", "let",
      "get", "got", "like", "one", "two", "way", "lot", "lots", "etc",
  };
  return words;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t j = 0; j < tokens_.size(); ++j) {
    if (tokens_[j].empty()) throw DataError("empty vocabulary token at position " + std::to_string(j));
    if (!index_.emplace(tokens_[j], j).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[j] + "'");
    }
  }
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? tokens_.size() : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& t : tokens_) out << t << '\n';
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocabulary(const std::vector<PromptRecord>& prompts, std::size_t m,
                            const std::unordered_set<std::string>& stopwords,
                            const TokenFilter& filter) {
  if (prompts.empty()) throw InvalidArgument("cannot build a vocabulary from no prompts");
  if (m == 0) throw InvalidArgument("vocabulary size must be at least 1");

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& p : prompts) {
    for (auto& token : tokenize(p.text)) {
      if (token.size() < kMinTokenLength || stopwords.contains(token)) continue;
      if (filter && !filter(token)) continue;
      ++counts[std::move(token)];
    }
  }
  if (counts.size() < m) {
    throw InvalidArgument("requested vocabulary of " + std::to_string(m) + " tokens but only " +
                          std::to_string(counts.size()) + " distinct eligible tokens exist");
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  const auto by_rank = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(m), ranked.end(),
                    by_rank);

  std::vector<std::string> tokens;
  tokens.reserve(m);
  for (std::size_t j = 0; j < m; ++j) tokens.push_back(std::move(ranked[j].first));
  return Vocabulary(std::move(tokens));
}

LabelMatrix::LabelMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_per_row_((cols + 63) / 64), bits_(rows * words_per_row_, 0) {}

void LabelMatrix::set(std::size_t i, std::size_t j, bool value) {
  auto& word = bits_[i * words_per_row_ + j / 64];
  const std::uint64_t mask = std::uint64_t{1} << (j % 64);
  word = value ? (word | mask) : (word & ~mask);
}

std::vector<std::uint8_t> LabelMatrix::row(std::size_t i) const {
  std::vector<std::uint8_t> out(cols_);
  for (std::size_t j = 0; j < cols_; ++j) out[j] = get(i, j) ? 1 : 0;
  return out;
}

std::size_t LabelMatrix::column_sum(std::size_t j) const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < rows_; ++i) total += get(i, j) ? 1 : 0;
  return total;
}

Eigen::MatrixXd LabelMatrix::to_eigen() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = get(i, j) ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<std::uint8_t> make_label_vector(const PromptRecord& prompt, const Vocabulary& v) {
  std::vector<std::uint8_t> labels(v.size(), 0);
  for (const auto& token : tokenize(prompt.text)) {
    const auto j = v.index_of(token);
    if (j < v.size()) labels[j] = 1;
  }
  return labels;
}

LabelMatrix make_label_matrix(const std::vector<PromptRecord>& prompts, const Vocabulary& v) {
  LabelMatrix labels(prompts.size(), v.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (const auto& token : tokenize(prompts[i].text)) {
      const auto j = v.index_of(token);
      if (j < v.size()) labels.set(i, j, true);
    }
  }
  return labels;
}

}  // namespace promptprobe
