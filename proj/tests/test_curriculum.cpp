#include <algorithm>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "promptprobe/curriculum.hpp"
#include "promptprobe/error.hpp"
#include "scenarios.hpp"
#include "test_support.hpp"

using namespace promptprobe;
using namespace promptprobe::testing;

namespace {

DifficultyScores make_scores(std::vector<double> s) {
  DifficultyScores out;
  out.per_sample = std::move(s);
  out.ids = iota_ids(out.per_sample.size());
  out.epochs_used = 1;
  return out;
}

std::array<std::size_t, 3> sizes(const CurriculumSchedule& s) {
  return {s.easy().size(), s.medium().size(), s.hard().size()};
}

void check_partition(const CurriculumSchedule& s, const std::vector<std::uint64_t>& ids) {
  std::multiset<std::uint64_t> all;
  for (const auto& c : s.chunks) all.insert(c.begin(), c.end());
  CHECK(all == std::multiset<std::uint64_t>(ids.begin(), ids.end()));
}

// One-hot features make column i of the embedding weight move iff sample i
// was in at least one batch (Adam leaves zero-gradient entries untouched
// while their moments are zero).
TrainingData one_hot_data(std::size_t n) {
  std::mt19937_64 rng(4);
  TrainingData data{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                    random_matrix(static_cast<Eigen::Index>(n), 3, rng), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2)};
  return data;
}

HeadConfig one_hot_config(std::size_t n, std::size_t batch) {
  HeadConfig c;
  c.feature_dim = n;
  c.embed_dim = 3;
  c.vocab_size = 2;
  c.lambda = 0.0;
  c.learning_rate = 0.01;
  c.batch_size = batch;
  c.seed = 12;
  return c;
}

std::set<std::size_t> touched_columns(const JointHeadModel& before, const JointHeadModel& after) {
  std::set<std::size_t> out;
  for (Eigen::Index j = 0; j < before.params.embed_weight.cols(); ++j) {
    if (before.params.embed_weight.col(j) != after.params.embed_weight.col(j)) out.insert(static_cast<std::size_t>(j));
  }
  return out;
}

}  // namespace

TEST_SUITE("curriculum") {

TEST_CASE("difficulty score is the mean over epochs") {
  const auto one = score_difficulty({{0.2, 0.8}}, {10, 11});
  CHECK(one.per_sample == std::vector<double>{0.2, 0.8});
  const auto three = score_difficulty({{0.2}, {0.4}, {0.6}}, {5});
  CHECK(three.per_sample[0] == doctest::Approx(0.4));
  CHECK(three.epochs_used == 3);
  CHECK_THROWS_AS(score_difficulty({{0.2, 0.3}, {0.4}}, {0, 1}), ShapeError);
  CHECK_THROWS_AS(score_difficulty({}, {}), InvalidArgument);
}

TEST_CASE("difficulty scoring is permutation equivariant") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> history(4, std::vector<double>(30));
  for (auto& epoch : history) for (auto& v : epoch) v = u(rng);
  const auto ids = iota_ids(30);
  const auto base = score_difficulty(history, ids);

  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  auto shuffled = history;
  std::vector<std::uint64_t> shuffled_ids(30);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t k = 0; k < 4; ++k) shuffled[k][i] = history[k][perm[i]];
    shuffled_ids[i] = ids[perm[i]];
  }
  const auto moved = score_difficulty(shuffled, shuffled_ids);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(moved.per_sample[i] == base.per_sample[perm[i]]);
    CHECK(moved.ids[i] == base.ids[perm[i]]);
  }
}

TEST_CASE("equal thirds sizes") {
  CHECK(sizes(split_equal_thirds(make_scores({9, 8, 7, 6, 5, 4, 3, 2, 1}))) == std::array<std::size_t, 3>{3, 3, 3});
  CHECK(sizes(split_equal_thirds(make_scores({9, 8, 7, 6, 5, 4, 3, 2, 1, 0}))) == std::array<std::size_t, 3>{4, 3, 3});
  CHECK(sizes(split_equal_thirds(make_scores({9, 8, 7, 6, 5, 4, 3, 2, 1, 0, -1}))) == std::array<std::size_t, 3>{4, 4, 3});
  CHECK_THROWS_AS(split_equal_thirds(make_scores({1, 2})), InvalidArgument);
}

TEST_CASE("equal thirds ranks by score then id") {
  const auto s = split_equal_thirds(make_scores({0.1, 0.9, 0.5, 0.7, 0.3, 0.8}));
  CHECK(s.easy() == std::vector<std::uint64_t>{1, 5});
  CHECK(s.medium() == std::vector<std::uint64_t>{3, 2});
  CHECK(s.hard() == std::vector<std::uint64_t>{4, 0});

  const auto ties = split_equal_thirds(make_scores({0.5, 0.5, 0.5, 0.5, 0.5, 0.5}));
  CHECK(ties.easy() == std::vector<std::uint64_t>{0, 1});
  CHECK(ties.medium() == std::vector<std::uint64_t>{2, 3});
  CHECK(ties.hard() == std::vector<std::uint64_t>{4, 5});
}

TEST_CASE("split heuristics always partition the ids") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(3 + rng() % 200);
    for (auto& v : s) v = std::round(u(rng) * 20.0) / 20.0;  // plenty of ties
    const auto scores = make_scores(s);
    const auto eq = split_equal_thirds(scores);
    check_partition(eq, scores.ids);
    const auto sz = sizes(eq);
    CHECK(*std::max_element(sz.begin(), sz.end()) - *std::min_element(sz.begin(), sz.end()) <= 1);
    if (percentile(s, 40) > percentile(s, 10)) check_partition(split_thresholds(scores), scores.ids);
  }
}

TEST_CASE("threshold split examples") {
  const auto s = split_thresholds(make_scores({0.9, 0.5, 0.1}), 0.8, 0.2);
  CHECK(s.easy() == std::vector<std::uint64_t>{0});
  CHECK(s.medium() == std::vector<std::uint64_t>{1});
  CHECK(s.hard() == std::vector<std::uint64_t>{2});

  const auto all_easy = split_thresholds(make_scores({0.9, 0.95, 0.85}), 0.8, 0.2);
  CHECK(all_easy.easy().size() == 3);
  CHECK(all_easy.medium().empty());
  CHECK(all_easy.hard().empty());

  CHECK_THROWS_AS(split_thresholds(make_scores({0.9, 0.5}), 0.2, 0.2), InvalidArgument);
  CHECK_THROWS_AS(split_thresholds(make_scores({0.3, 0.5}), 0.8, 0.2), InvalidArgument);
}

TEST_CASE("default thresholds on uniform scores") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(1000);
  for (auto& v : s) v = u(rng);
  const auto schedule = split_thresholds(make_scores(s));

  // Independent count against the textbook percentile definition.
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  const auto pct = [&](double q) {
    const double pos = q / 100.0 * 999.0;
    const auto lo = static_cast<std::size_t>(pos);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
  };
  CHECK(schedule.tau_easy == doctest::Approx(pct(40)).epsilon(1e-15));
  CHECK(schedule.tau_hard == doctest::Approx(pct(10)).epsilon(1e-15));
  CHECK(schedule.easy().size() >= 599);
  CHECK(schedule.easy().size() <= 601);
  CHECK(schedule.hard().size() >= 99);
  CHECK(schedule.hard().size() <= 101);
}

TEST_CASE("stage boundaries and budget") {
  CHECK(stage_boundaries(90) == std::array<std::uint64_t, 2>{30, 60});
  CHECK(stage_boundaries(10) == std::array<std::uint64_t, 2>{3, 6});
  CHECK_THROWS_AS(stage_boundaries(2), InvalidArgument);
  CHECK(step_budget(1000, 64, 3) == 48);
  CHECK(step_budget(64, 64, 3) == 3);
}

TEST_CASE("all-easy schedule reproduces vanilla training") {
  for (auto v : {HeadVariant::Separate, HeadVariant::ClassIntoEmbed, HeadVariant::EmbedIntoClass}) {
    auto c = one_hot_config(20, 6);
    c.variant = v;
    c.lambda = 0.1;
    std::mt19937_64 rng(3);
    TrainingData data{random_matrix(20, 20, rng), random_matrix(20, 3, rng), Eigen::MatrixXd::Ones(20, 2)};
    auto vanilla = make_model(c);
    train(vanilla, data, c);

    CurriculumSchedule schedule;
    schedule.chunks[0] = iota_ids(20);
    const auto cur = curriculum_train([&] { return make_model(c); }, data, iota_ids(20), schedule,
                                      step_budget(20, c.batch_size, c.epochs), c);
    CHECK(cur.model == vanilla);
    CHECK(cur.history.steps == 12);
  }
}

TEST_CASE("early stages draw only from the easier chunks") {
  const auto c = one_hot_config(12, 1);
  const auto data = one_hot_data(12);
  CurriculumSchedule schedule;
  schedule.chunks[0] = {0};
  schedule.chunks[1] = {};
  schedule.chunks[2] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  const auto init = make_model(c);
  const auto cur = curriculum_train([&] { return make_model(c); }, data, iota_ids(12), schedule, 3, c);
  const auto touched = touched_columns(init, cur.model);
  CHECK(touched.contains(0));
  CHECK(touched.size() <= 2);  // stage 3 ran a single one-sample step
}

TEST_CASE("stage 3 visits every sample") {
  const std::size_t n = 40;
  const auto c = one_hot_config(n, 4);
  const auto data = one_hot_data(n);
  CurriculumSchedule schedule;
  for (std::uint64_t i = 0; i < n; ++i) schedule.chunks[i % 3].push_back(i);
  // Budget 30: stage 3 has 10 steps, one full pass over 40 samples.
  const auto init = make_model(c);
  const auto cur = curriculum_train([&] { return make_model(c); }, data, iota_ids(n), schedule, 30, c);
  CHECK(touched_columns(init, cur.model).size() == n);
  CHECK(cur.history.boundaries == std::array<std::uint64_t, 2>{10, 20});
  CHECK(cur.history.stage_loss.size() == 3);
}

TEST_CASE("curriculum rejects a schedule that does not partition the ids") {
  const auto c = one_hot_config(6, 2);
  const auto data = one_hot_data(6);
  const auto factory = [&] { return make_model(c); };
  CurriculumSchedule missing;
  missing.chunks[0] = {0, 1, 2, 3, 4};
  CHECK_THROWS_AS(curriculum_train(factory, data, iota_ids(6), missing, 9, c), DataError);
  CurriculumSchedule dup;
  dup.chunks[0] = {0, 1, 2};
  dup.chunks[1] = {2, 3, 4, 5};
  CHECK_THROWS_AS(curriculum_train(factory, data, iota_ids(6), dup, 9, c), DataError);
  CurriculumSchedule empty_easy;
  empty_easy.chunks[1] = iota_ids(6);
  CHECK_THROWS_AS(curriculum_train(factory, data, iota_ids(6), empty_easy, 9, c), InvalidArgument);
}

TEST_CASE("schedule JSON and score files") {
  const auto scores = make_scores({0.1, 0.9, 0.5});
  const auto s = split_equal_thirds(scores);
  const auto j = schedule_to_json(s, stage_boundaries(9), 9);
  CHECK(j["easy"] == nlohmann::json::array({1}));
  CHECK(j["hard"] == nlohmann::json::array({0}));
  CHECK(j["stage_boundaries"] == nlohmann::json::array({3, 6}));
  CHECK(j["total_steps"] == 9);

  const auto back = scores_from_matrix(scores_to_matrix(scores));
  CHECK(back.ids == scores.ids);
  CHECK(back.per_sample[1] == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("difficulty scores track injected noise") {
  CHECK(difficulty_spearman(0) <= -0.5);
}

}  // TEST_SUITE
