#pragma once

// Synthetic end-to-end runs shared by the unit tests and the acceptance
// binary.

#include <array>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "promptprobe/curriculum.hpp"
#include "promptprobe/evalkit.hpp"
#include "promptprobe/heads.hpp"
#include "promptprobe/synth.hpp"

namespace promptprobe::testing {

// Learning rate for the 3-epoch synthetic runs. The library default of 1e-4
// moves Adam too little in 48 steps to recover a random linear map.
inline constexpr double kSynthLearningRate = 0.05;
inline constexpr std::size_t kSynthTrain = 1000;
inline constexpr std::size_t kSynthHeldOut = 200;

inline HeadConfig synth_head_config(HeadVariant variant, std::uint64_t seed) {
  HeadConfig c;
  c.variant = variant;
  c.feature_dim = 16;
  c.embed_dim = 8;
  c.vocab_size = 32;
  c.learning_rate = kSynthLearningRate;
  c.batch_size = 64;
  c.epochs = 3;
  c.seed = seed;
  return c;
}

inline Eigen::MatrixXd predict_rows(const JointHeadModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(model.embed_dim));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = forward(model, x.row(i).transpose()).embedding.transpose();
  return out;
}

// Noiseless task: train on 1000 samples, mean cosine on 200 held-out ones.
inline double synthetic_recovery(HeadVariant variant, std::uint64_t seed) {
  SynthSpec spec;
  spec.n = kSynthTrain + kSynthHeldOut;
  spec.seed = seed;
  const auto data = generate(spec);
  const Eigen::MatrixXd x = data.features.to_eigen();
  const Eigen::MatrixXd t = data.targets.to_eigen();
  const Eigen::MatrixXd l = data.labels.to_eigen();
  const TrainingData train_set{x.topRows(kSynthTrain), t.topRows(kSynthTrain), l.topRows(kSynthTrain)};
  const auto config = synth_head_config(variant, seed);
  auto model = make_model(config);
  train(model, train_set, config);
  return evaluate(predict_rows(model, x.bottomRows(kSynthHeldOut)), t.bottomRows(kSynthHeldOut)).mean_cosine;
}

inline std::vector<std::uint64_t> iota_ids(std::size_t n) {
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  return ids;
}

// Three noise tiers assigned round-robin; returns the rank correlation
// between phase-1 difficulty scores and the injected noise.
inline double difficulty_spearman(std::uint64_t seed) {
  constexpr std::array<double, 3> tiers = {0.0, 0.5, 2.0};
  SynthSpec spec;
  spec.n = kSynthTrain;
  spec.seed = seed;
  spec.noise.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) spec.noise[i] = tiers[i % tiers.size()];
  const auto data = generate(spec);
  const auto train_set = TrainingData::from(data.features, data.targets, data.labels);
  const auto config = synth_head_config(HeadVariant::Separate, seed);
  const auto scores = score_by_training(train_set, iota_ids(spec.n), config, config.epochs);
  return spearman(scores.per_sample, spec.noise);
}

struct PairedRun {
  double vanilla = 0.0;
  double curriculum = 0.0;
};

// 20% of the training targets at noise 2.0; validation against the clean
// map. Both runs use the same seed and the same number of optimizer steps.
inline PairedRun noisy_paired_run(std::uint64_t seed, SplitHeuristic heuristic) {
  SynthSpec spec;
  spec.n = kSynthTrain + kSynthHeldOut;
  spec.seed = seed;
  spec.noise = noisy_fraction_profile(kSynthTrain, 0.2, 2.0, seed);
  spec.noise.resize(spec.n, 0.0);
  const auto data = generate(spec);
  const Eigen::MatrixXd x = data.features.to_eigen();
  const Eigen::MatrixXd t = data.targets.to_eigen();
  const Eigen::MatrixXd l = data.labels.to_eigen();
  const TrainingData train_set{x.topRows(kSynthTrain), t.topRows(kSynthTrain), l.topRows(kSynthTrain)};

  const Eigen::MatrixXd val_x = x.bottomRows(kSynthHeldOut);
  Eigen::MatrixXd clean = (val_x * data.ground_map.transpose());
  clean.rowwise().normalize();

  const auto config = synth_head_config(HeadVariant::Separate, seed);
  auto vanilla = make_model(config);
  train(vanilla, train_set, config);

  SplitOptions options;
  options.heuristic = heuristic;
  const auto two = run_two_phase(train_set, iota_ids(kSynthTrain), config, config.epochs, options);

  return {evaluate(predict_rows(vanilla, val_x), clean).mean_cosine,
          evaluate(predict_rows(two.result.model, val_x), clean).mean_cosine};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace promptprobe::testing
