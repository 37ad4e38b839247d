#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "promptprobe/dataio.hpp"
#include "promptprobe/vocab.hpp"

namespace promptprobe {

struct EvalReport {
  double mean_cosine = 0.0;
  std::vector<double> per_sample;
  std::size_t n = 0;
};

// Row-wise cosine similarity between predictions and targets.
EvalReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

inline constexpr std::size_t kCaptionWords = 10;

struct CaptionResult {
  std::uint64_t retrieved_id = 0;
  std::string retrieved_prompt;
  std::vector<std::string> appended_words;
  double neighbor_similarity = 0.0;
  std::size_t neighbor_row = 0;

  // Retrieved prompt followed by the appended words, comma separated.
  std::string caption() const;
};

struct Neighbor {
  std::size_t row = 0;
  double similarity = 0.0;
};

// Highest cosine similarity row of `db`; ties go to the lowest row.
Neighbor nearest_neighbor(const Eigen::Ref<const Eigen::VectorXd>& query, const Eigen::MatrixXd& db);

// Up to `k` vocabulary indices by descending probability, ties in
// vocabulary order.
std::vector<std::size_t> top_words(const Eigen::Ref<const Eigen::VectorXd>& probs, std::size_t k);

// 1-NN captioning: retrieve the prompt whose embedding is closest to the
// predicted one and append the most probable vocabulary words.
CaptionResult caption(const Eigen::Ref<const Eigen::VectorXd>& query_embedding,
                      const Eigen::Ref<const Eigen::VectorXd>& probs, const Eigen::MatrixXd& db,
                      const std::vector<PromptRecord>& prompts, const Vocabulary& vocab);

}  // namespace promptprobe
