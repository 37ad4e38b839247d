#include "promptprobe/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

// Sample indices ordered by descending score, ties by ascending id.
std::vector<std::size_t> rank_by_score(const DifficultyScores& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.per_sample[a] != scores.per_sample[b]) {
      return scores.per_sample[a] > scores.per_sample[b];
    }
    return scores.ids[a] < scores.ids[b];
  });
  return order;
}

void check_scores(const DifficultyScores& scores) {
  if (scores.ids.size() != scores.per_sample.size()) {
    throw ShapeError("difficulty scores and ids differ in length");
  }
  for (double s : scores.per_sample) {
    if (!std::isfinite(s)) throw DataError("non-finite difficulty score");
  }
}

}  // namespace

DifficultyScores score_difficulty(const std::vector<std::vector<double>>& history,
                                  const std::vector<std::uint64_t>& ids) {
  if (history.empty()) throw InvalidArgument("difficulty scoring needs at least one epoch");
  const std::size_t n = history.front().size();
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (history[k].size() != n) {
      throw ShapeError("ragged similarity history: epoch " + std::to_string(k) + " has " +
                       std::to_string(history[k].size()) + " samples, epoch 0 has " +
                       std::to_string(n));
    }
  }
  if (ids.size() != n) throw ShapeError("similarity history and ids differ in length");

  DifficultyScores scores;
  scores.ids = ids;
  scores.per_sample.assign(n, 0.0);
  scores.epochs_used = history.size();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (const auto& epoch : history) total += epoch[i];
    scores.per_sample[i] = total / static_cast<double>(history.size());
  }
  check_scores(scores);
  return scores;
}

CurriculumSchedule split_equal_thirds(const DifficultyScores& scores) {
  check_scores(scores);
  const std::size_t n = scores.size();
  if (n < 3) throw InvalidArgument("equal-thirds split needs at least 3 samples, got " + std::to_string(n));

  const auto order = rank_by_score(scores);
  const std::size_t n_easy = (n + 2) / 3;
  const std::size_t n_medium = (n - n_easy + 1) / 2;

  CurriculumSchedule schedule;
  schedule.heuristic = SplitHeuristic::EqualThirds;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t chunk = r < n_easy ? 0 : (r < n_easy + n_medium ? 1 : 2);
    schedule.chunks[chunk].push_back(scores.ids[order[r]]);
  }
  return schedule;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile rank must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CurriculumSchedule split_thresholds(const DifficultyScores& scores, std::optional<double> tau_easy,
                                    std::optional<double> tau_hard) {
  check_scores(scores);
  if (scores.size() == 0) throw InvalidArgument("threshold split on an empty score set");
  const double easy_cut = tau_easy.value_or(percentile(scores.per_sample, kDefaultEasyPercentile));
  const double hard_cut = tau_hard.value_or(percentile(scores.per_sample, kDefaultHardPercentile));
  if (!(easy_cut > hard_cut)) {
    throw InvalidArgument("easy threshold " + std::to_string(easy_cut) +
                          " must exceed hard threshold " + std::to_string(hard_cut));
  }

  CurriculumSchedule schedule;
  schedule.heuristic = SplitHeuristic::Thresholds;
  schedule.tau_easy = easy_cut;
  schedule.tau_hard = hard_cut;
  for (std::size_t i : rank_by_score(scores)) {
    const double s = scores.per_sample[i];
    const std::size_t chunk = s >= easy_cut ? 0 : (s < hard_cut ? 2 : 1);
    schedule.chunks[chunk].push_back(scores.ids[i]);
  }
  if (schedule.easy().empty()) {
    throw InvalidArgument("no sample reaches the easy threshold " + std::to_string(easy_cut));
  }
  return schedule;
}

std::array<std::uint64_t, 2> stage_boundaries(std::uint64_t total_steps) {
  if (total_steps < 3) {
    throw InvalidArgument("curriculum needs a budget of at least 3 steps, got " +
                          std::to_string(total_steps));
  }
  return {total_steps / 3, 2 * total_steps / 3};
}

std::uint64_t step_budget(std::size_t n, std::size_t batch_size, std::size_t epochs) {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  return static_cast<std::uint64_t>((n + batch_size - 1) / batch_size) * epochs;
}

CurriculumResult curriculum_train(const ModelFactory& model_factory, const TrainingData& data,
                                  const std::vector<std::uint64_t>& ids,
                                  const CurriculumSchedule& schedule, std::uint64_t total_steps,
                                  const HeadConfig& config) {
  config.validate();
  if (ids.size() != data.size()) throw ShapeError("ids and training rows differ in length");

  std::unordered_map<std::uint64_t, std::size_t> row_of;
  row_of.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) row_of.emplace(ids[i], i);

  // Chunks must partition the training ids.
  std::array<std::vector<std::size_t>, 3> chunk_rows;
  std::unordered_set<std::size_t> seen;
  for (std::size_t c = 0; c < 3; ++c) {
    for (auto id : schedule.chunks[c]) {
      const auto it = row_of.find(id);
      if (it == row_of.end()) throw DataError("schedule id " + std::to_string(id) + " is not a training id");
      if (!seen.insert(it->second).second) {
        throw DataError("schedule id " + std::to_string(id) + " appears in more than one chunk");
      }
      chunk_rows[c].push_back(it->second);
    }
  }
  if (seen.size() != ids.size()) throw DataError("schedule does not cover every training id");
  if (chunk_rows[0].empty()) throw InvalidArgument("curriculum stage 1 has an empty pool");

  const auto boundaries = stage_boundaries(total_steps);

  std::array<std::vector<std::size_t>, 3> pools;
  for (std::size_t s = 0; s < 3; ++s) {
    if (s > 0) pools[s] = pools[s - 1];
    pools[s].insert(pools[s].end(), chunk_rows[s].begin(), chunk_rows[s].end());
  }
  for (auto& pool : pools) std::sort(pool.begin(), pool.end());

  CurriculumResult out{model_factory(), {}};
  out.history.boundaries = boundaries;
  BatchStream stream(pools[0], config.batch_size, shuffle_seed(config.seed));

  const std::array<std::uint64_t, 4> stage_start = {0, boundaries[0], boundaries[1], total_steps};
  for (std::size_t s = 0; s < 3; ++s) {
    stream.reset_pool(pools[s]);
    double loss_sum = 0.0;
    const std::uint64_t begin = stage_start[s];
    const std::uint64_t end = stage_start[s + 1];
    for (std::uint64_t step = begin; step < end; ++step) {
      const auto batch = stream.next();
      loss_sum += train_step(out.model, data, batch, config,
                             "stage " + std::to_string(s + 1) + ", step " + std::to_string(step));
    }
    out.history.stage_loss.push_back(end > begin ? loss_sum / static_cast<double>(end - begin) : 0.0);
    out.history.steps += end - begin;
  }
  return out;
}

DifficultyScores score_by_training(const TrainingData& data, const std::vector<std::uint64_t>& ids,
                                   const HeadConfig& config, std::size_t scoring_epochs) {
  if (scoring_epochs == 0) throw InvalidArgument("difficulty scoring needs at least one epoch");
  HeadConfig phase1 = config;
  phase1.epochs = scoring_epochs;
  auto model = make_model(phase1);
  const auto history = train(model, data, phase1);
  return score_difficulty(history.epoch_cosines, ids);
}

CurriculumSchedule make_schedule(const DifficultyScores& scores, const SplitOptions& options) {
  return options.heuristic == SplitHeuristic::EqualThirds
             ? split_equal_thirds(scores)
             : split_thresholds(scores, options.tau_easy, options.tau_hard);
}

TwoPhaseResult run_two_phase(const TrainingData& data, const std::vector<std::uint64_t>& ids,
                             const HeadConfig& config, std::size_t scoring_epochs,
                             const SplitOptions& options) {
  auto scores = score_by_training(data, ids, config, scoring_epochs);
  auto schedule = make_schedule(scores, options);
  const auto budget = step_budget(data.size(), config.batch_size, scoring_epochs);
  auto result = curriculum_train([&] { return make_model(config); }, data, ids, schedule, budget, config);
  return {std::move(scores), std::move(schedule), std::move(result)};
}

nlohmann::json schedule_to_json(const CurriculumSchedule& schedule,
                                std::array<std::uint64_t, 2> boundaries,
                                std::uint64_t total_steps) {
  nlohmann::json j;
  j["heuristic"] = schedule.heuristic == SplitHeuristic::EqualThirds ? "equal" : "thresholds";
  if (schedule.heuristic == SplitHeuristic::Thresholds) {
    j["tau_easy"] = schedule.tau_easy;
    j["tau_hard"] = schedule.tau_hard;
  }
  j["easy"] = schedule.easy();
  j["medium"] = schedule.medium();
  j["hard"] = schedule.hard();
  j["stage_boundaries"] = boundaries;
  j["total_steps"] = total_steps;
  return j;
}

FeatureMatrix scores_to_matrix(const DifficultyScores& scores) {
  std::vector<float> data(scores.per_sample.begin(), scores.per_sample.end());
  return FeatureMatrix(scores.size(), 1, std::move(data), scores.ids);
}

DifficultyScores scores_from_matrix(const FeatureMatrix& m) {
  if (m.cols() != 1) throw ShapeError("difficulty score matrix must have one column");
  DifficultyScores scores;
  scores.ids = m.row_ids();
  scores.per_sample.assign(m.data().begin(), m.data().end());
  scores.epochs_used = 1;
  return scores;
}

}  // namespace promptprobe
