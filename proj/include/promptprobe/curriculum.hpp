#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "promptprobe/heads.hpp"

namespace promptprobe {

// Mean per-sample cosine similarity across the preliminary training epochs.
// Higher means easier (better aligned image/prompt pair).
struct DifficultyScores {
  std::vector<std::uint64_t> ids;
  std::vector<double> per_sample;
  std::size_t epochs_used = 0;

  std::size_t size() const { return per_sample.size(); }
};

// history[k][i] is the similarity of sample i after epoch k; ids[i] names
// sample i. Throws on an empty or ragged history.
DifficultyScores score_difficulty(const std::vector<std::vector<double>>& history,
                                  const std::vector<std::uint64_t>& ids);

enum class SplitHeuristic { EqualThirds, Thresholds };

struct CurriculumSchedule {
  // Sample ids per difficulty level, in the order they were ranked.
  std::array<std::vector<std::uint64_t>, 3> chunks;  // easy, medium, hard
  SplitHeuristic heuristic = SplitHeuristic::EqualThirds;
  double tau_easy = 0.0;  // only meaningful for Thresholds
  double tau_hard = 0.0;

  const std::vector<std::uint64_t>& easy() const { return chunks[0]; }
  const std::vector<std::uint64_t>& medium() const { return chunks[1]; }
  const std::vector<std::uint64_t>& hard() const { return chunks[2]; }
};

// Descending score, ties by ascending id; sizes ceil(n/3), ceil(rest/2),
// remainder. Needs at least three samples.
CurriculumSchedule split_equal_thirds(const DifficultyScores& scores);

// easy = {score >= tau_easy}, hard = {score < tau_hard}, medium = rest.
// Unset thresholds default to the 40th and 10th score percentiles.
CurriculumSchedule split_thresholds(const DifficultyScores& scores,
                                    std::optional<double> tau_easy = std::nullopt,
                                    std::optional<double> tau_hard = std::nullopt);

// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

inline constexpr double kDefaultEasyPercentile = 40.0;
inline constexpr double kDefaultHardPercentile = 10.0;

// Steps at which the medium and hard chunks join the pool: floor(S/3) and
// floor(2S/3). Requires S >= 3 so the boundaries are strictly increasing.
std::array<std::uint64_t, 2> stage_boundaries(std::uint64_t total_steps);

// Optimizer steps in `epochs` shuffled passes over n samples.
std::uint64_t step_budget(std::size_t n, std::size_t batch_size, std::size_t epochs);

struct CurriculumHistory {
  std::vector<double> stage_loss;  // mean batch loss per stage
  std::array<std::uint64_t, 2> boundaries{};
  std::uint64_t steps = 0;
};

struct CurriculumResult {
  JointHeadModel model;
  CurriculumHistory history;
};

using ModelFactory = std::function<JointHeadModel()>;

// Staged retraining from a fresh model: easy chunk only, then easy+medium,
// then everything, switching at stage_boundaries(total_steps). `ids[i]`
// names row i of `data`. Batches come from shuffled passes over the active
// pool, using the same shuffling stream as vanilla training.
CurriculumResult curriculum_train(const ModelFactory& model_factory, const TrainingData& data,
                                  const std::vector<std::uint64_t>& ids,
                                  const CurriculumSchedule& schedule, std::uint64_t total_steps,
                                  const HeadConfig& config);

// Full two-phase procedure: vanilla training for `scoring_epochs` to score
// difficulty, split, then curriculum_train with the same step budget.
struct TwoPhaseResult {
  DifficultyScores scores;
  CurriculumSchedule schedule;
  CurriculumResult result;
};

struct SplitOptions {
  SplitHeuristic heuristic = SplitHeuristic::EqualThirds;
  std::optional<double> tau_easy;
  std::optional<double> tau_hard;
};

DifficultyScores score_by_training(const TrainingData& data, const std::vector<std::uint64_t>& ids,
                                   const HeadConfig& config, std::size_t scoring_epochs);

CurriculumSchedule make_schedule(const DifficultyScores& scores, const SplitOptions& options);

TwoPhaseResult run_two_phase(const TrainingData& data, const std::vector<std::uint64_t>& ids,
                             const HeadConfig& config, std::size_t scoring_epochs,
                             const SplitOptions& options);

nlohmann::json schedule_to_json(const CurriculumSchedule& schedule,
                                std::array<std::uint64_t, 2> boundaries,
                                std::uint64_t total_steps);

// Scores as an n x 1 matrix keyed by sample id, so the second phase can run
// in a separate process.
FeatureMatrix scores_to_matrix(const DifficultyScores& scores);
DifficultyScores scores_from_matrix(const FeatureMatrix& m);

}  // namespace promptprobe
