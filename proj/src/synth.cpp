#include "promptprobe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

using Index = Eigen::Index;

// Independent streams per component so that changing one dimension does not
// reshuffle every other draw.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd gaussian(Index rows, Index cols, double mean, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  Eigen::MatrixXd out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = dist(rng);
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (n == 0 || d == 0 || e == 0 || m == 0) throw InvalidArgument("synthetic dimensions must be >= 1");
  if (!noise.empty() && noise.size() != n) {
    throw InvalidArgument("noise profile has " + std::to_string(noise.size()) + " entries for " +
                          std::to_string(n) + " samples");
  }
  for (double s : noise) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidArgument("noise levels must be >= 0");
  }
}

std::string synth_word(std::size_t j) {
  std::string word = "w";
  std::string digits;
  for (int k = 0; k < 3 || j > 0; ++k) {
    digits.push_back(static_cast<char>('a' + j % 26));
    j /= 26;
  }
  word.append(digits.rbegin(), digits.rend());
  return word;
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const auto n = static_cast<Index>(spec.n);
  const auto d = static_cast<Index>(spec.d);
  const auto e = static_cast<Index>(spec.e);
  const auto m = static_cast<Index>(spec.m);

  auto map_rng = stream(spec.seed, 1);
  auto feature_rng = stream(spec.seed, 2);
  auto noise_rng = stream(spec.seed, 3);
  auto label_rng = stream(spec.seed, 4);
  auto pool_rng = stream(spec.seed, 5);

  SynthData out;
  out.ground_map = gaussian(e, d, 0.0, 1.0 / std::sqrt(static_cast<double>(spec.d)), map_rng);
  const Eigen::MatrixXd x = gaussian(n, d, 0.0, 1.0, feature_rng);
  const Eigen::MatrixXd eta = gaussian(n, e, 0.0, 1.0, noise_rng);
  const Eigen::MatrixXd projection = gaussian(m, d, 0.0, 1.0, label_rng);

  out.noise_levels = spec.noise.empty() ? std::vector<double>(spec.n, 0.0) : spec.noise;

  Eigen::MatrixXd targets(n, e);
  for (Index i = 0; i < n; ++i) {
    Eigen::VectorXd t = out.ground_map * x.row(i).transpose() +
                        out.noise_levels[static_cast<std::size_t>(i)] * eta.row(i).transpose();
    const double norm = t.norm();
    // A zero target is measure-zero; fall back to the clean direction.
    if (norm == 0.0) t = out.ground_map * x.row(i).transpose();
    targets.row(i) = (t / t.norm()).transpose();
  }

  out.words.reserve(spec.m);
  for (std::size_t j = 0; j < spec.m; ++j) out.words.push_back(synth_word(j));

  out.labels = LabelMatrix(spec.n, spec.m);
  const Eigen::MatrixXd scores = x * projection.transpose();
  out.prompts.reserve(spec.n);
  for (Index i = 0; i < n; ++i) {
    std::string text;
    for (Index j = 0; j < m; ++j) {
      if (scores(i, j) > 0.0) {
        out.labels.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), true);
        if (!text.empty()) text += ' ';
        text += out.words[static_cast<std::size_t>(j)];
      }
    }
    out.prompts.push_back({static_cast<std::uint64_t>(i), std::move(text)});
  }

  out.features = FeatureMatrix::from_eigen(x);
  out.targets = FeatureMatrix::from_eigen(targets);

  const auto p = static_cast<Index>(spec.pool_size);
  const Eigen::MatrixXd pool = gaussian(p, d, spec.shift, 1.0, pool_rng);
  std::vector<std::uint64_t> pool_ids(spec.pool_size);
  std::iota(pool_ids.begin(), pool_ids.end(), static_cast<std::uint64_t>(spec.n));
  out.pool = FeatureMatrix::from_eigen(pool, std::move(pool_ids));
  return out;
}

std::vector<double> noisy_fraction_profile(std::size_t n, double fraction, double level,
                                           std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("fraction must lie in [0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = stream(seed, 6);
  std::shuffle(order.begin(), order.end(), rng);
  const auto noisy = static_cast<std::size_t>(std::round(fraction * static_cast<double>(n)));
  std::vector<double> profile(n, 0.0);
  for (std::size_t k = 0; k < noisy; ++k) profile[order[k]] = level;
  return profile;
}

}  // namespace promptprobe
