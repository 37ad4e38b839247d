#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "promptprobe/dataio.hpp"
#include "promptprobe/vocab.hpp"

namespace promptprobe {

// Ground-truth-recoverable fixture: features x ~ N(0, I_d), a fixed linear
// map A (e x d, entries N(0, 1/d)), targets normalize(A x + sigma_i * eta)
// and vocabulary labels from thresholded random projections of x.
struct SynthSpec {
  std::size_t n = 1000;
  std::size_t d = 16;
  std::size_t e = 8;
  std::size_t m = 32;
  // Per-sample target noise; empty means noiseless.
  std::vector<double> noise;
  // Unlabeled target-domain pool drawn from N(shift, I_d).
  std::size_t pool_size = 0;
  double shift = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  FeatureMatrix features;  // n x d
  FeatureMatrix targets;   // n x e, unit rows
  LabelMatrix labels;      // n x m
  std::vector<double> noise_levels;
  FeatureMatrix pool;      // pool_size x d (ids continue after the samples)
  Eigen::MatrixXd ground_map;  // e x d
  // One prompt per sample listing its active synthetic words.
  std::vector<PromptRecord> prompts;
  std::vector<std::string> words;  // synthetic vocabulary, column order
};

// Alphabetic placeholder word for vocabulary column j ("waaa", "waab", ...).
std::string synth_word(std::size_t j);

SynthData generate(const SynthSpec& spec);

// Noise profile with `fraction` of samples (chosen by seed) at `level` and
// the rest noiseless.
std::vector<double> noisy_fraction_profile(std::size_t n, double fraction, double level,
                                           std::uint64_t seed);

}  // namespace promptprobe
