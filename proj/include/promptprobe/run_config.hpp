#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "promptprobe/curriculum.hpp"
#include "promptprobe/dakl.hpp"
#include "promptprobe/heads.hpp"

namespace promptprobe {

// Every tunable of the pipeline. Values come from defaults, then an optional
// key=value config file, then command-line flags; later sources win. Keys are
// the long flag names without the leading dashes.
struct RunConfig {
  double lambda = 0.1;
  std::size_t vocab_size = 1000;
  HeadVariant head_config = HeadVariant::Separate;
  double lr = 1e-4;
  std::size_t batch = 64;
  std::size_t epochs = 3;
  std::uint64_t seed = 0;
  SplitHeuristic curriculum = SplitHeuristic::EqualThirds;
  std::optional<double> tau_easy;
  std::optional<double> tau_hard;
  std::optional<std::size_t> scoring_epochs;  // defaults to `epochs`
  double gamma = 0.001;
  double ridge = 1.0;
  std::size_t centroids = 10000;
  std::size_t kmeans_iters = 100;
  EnsembleMode ensemble = EnsembleMode::Median;
  std::vector<double> weights;
  bool deterministic = false;

  static const std::vector<std::string>& keys();

  // Throws InvalidArgument for an unknown key or unparsable value.
  void set(std::string_view key, std::string_view value);
  bool is_set(std::string_view key) const { return explicit_.contains(std::string(key)); }

  // Lines of `key = value`; '#' starts a comment; blank lines ignored.
  void merge_file(const std::filesystem::path& path);

  HeadConfig head(std::size_t feature_dim, std::size_t embed_dim, std::size_t vocab) const;
  // The default centroid count is clipped to the sample count; an explicit
  // one is passed through (and rejected later if too large).
  DaklConfig dakl(std::size_t samples) const;
  SplitOptions split() const;
  std::size_t phase1_epochs() const { return scoring_epochs.value_or(epochs); }

  nlohmann::json to_json() const;

 private:
  std::set<std::string> explicit_;
};

}  // namespace promptprobe
