#include "promptprobe/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw InvalidArgument("invalid value '" + std::string(value) + "' for " + std::string(key) +
                        ": expected " + std::string(want));
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true or false");
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "lambda", "vocab-size", "head-config", "lr", "batch", "epochs", "seed",
      "curriculum", "tau-easy", "tau-hard", "scoring-epochs", "gamma", "ridge",
      "centroids", "kmeans-iters", "ensemble", "weights", "deterministic",
  };
  return k;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view value = strip(raw);
  if (key == "lambda") {
    lambda = parse_double(key, value);
    if (lambda < 0.0) bad_value(key, value, "a value >= 0");
  } else if (key == "vocab-size") {
    vocab_size = parse_uint(key, value);
    if (vocab_size == 0) bad_value(key, value, "at least 1");
  } else if (key == "head-config") {
    head_config = parse_head_variant(value);
  } else if (key == "lr") {
    lr = parse_double(key, value);
    if (lr < 0.0) bad_value(key, value, "a value >= 0");
  } else if (key == "batch") {
    batch = parse_uint(key, value);
    if (batch == 0) bad_value(key, value, "at least 1");
  } else if (key == "epochs") {
    epochs = parse_uint(key, value);
    if (epochs == 0) bad_value(key, value, "at least 1");
  } else if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "curriculum") {
    if (value == "equal") {
      curriculum = SplitHeuristic::EqualThirds;
    } else if (value == "thresholds") {
      curriculum = SplitHeuristic::Thresholds;
    } else {
      bad_value(key, value, "equal or thresholds");
    }
  } else if (key == "tau-easy") {
    tau_easy = parse_double(key, value);
  } else if (key == "tau-hard") {
    tau_hard = parse_double(key, value);
  } else if (key == "scoring-epochs") {
    scoring_epochs = parse_uint(key, value);
    if (*scoring_epochs == 0) bad_value(key, value, "at least 1");
  } else if (key == "gamma") {
    gamma = parse_double(key, value);
    if (gamma <= 0.0) bad_value(key, value, "a value > 0");
  } else if (key == "ridge") {
    ridge = parse_double(key, value);
    if (ridge <= 0.0) bad_value(key, value, "a value > 0");
  } else if (key == "centroids") {
    centroids = parse_uint(key, value);
    if (centroids == 0) bad_value(key, value, "at least 1");
  } else if (key == "kmeans-iters") {
    kmeans_iters = parse_uint(key, value);
  } else if (key == "ensemble") {
    if (value == "median") {
      ensemble = EnsembleMode::Median;
    } else if (value == "weighted") {
      ensemble = EnsembleMode::WeightedAverage;
    } else {
      bad_value(key, value, "median or weighted");
    }
  } else if (key == "weights") {
    weights.clear();
    std::string_view rest = value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      weights.push_back(parse_double(key, strip(rest.substr(0, comma))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  } else if (key == "deterministic") {
    deterministic = parse_bool(key, value);
  } else {
    throw InvalidArgument("unknown configuration key '" + std::string(key) + "'");
  }
  explicit_.insert(std::string(key));
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = strip(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(strip(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const InvalidArgument& err) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
}

HeadConfig RunConfig::head(std::size_t feature_dim, std::size_t embed_dim, std::size_t vocab) const {
  HeadConfig c;
  c.variant = head_config;
  c.feature_dim = feature_dim;
  c.embed_dim = embed_dim;
  c.vocab_size = vocab;
  c.lambda = lambda;
  c.learning_rate = lr;
  c.batch_size = batch;
  c.epochs = epochs;
  c.seed = seed;
  c.deterministic = deterministic;
  c.validate();
  return c;
}

DaklConfig RunConfig::dakl(std::size_t samples) const {
  DaklConfig c;
  c.gamma = gamma;
  c.ridge = ridge;
  c.num_centroids = is_set("centroids") ? centroids : std::min(centroids, samples);
  c.kmeans_iters = kmeans_iters;
  c.kmeans_seed = seed;
  c.validate();
  return c;
}

SplitOptions RunConfig::split() const { return {curriculum, tau_easy, tau_hard}; }

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = {
      {"lambda", lambda},
      {"vocab-size", vocab_size},
      {"head-config", to_string(head_config)},
      {"lr", lr},
      {"batch", batch},
      {"epochs", epochs},
      {"seed", seed},
      {"curriculum", curriculum == SplitHeuristic::EqualThirds ? "equal" : "thresholds"},
      {"scoring-epochs", phase1_epochs()},
      {"gamma", gamma},
      {"ridge", ridge},
      {"centroids", centroids},
      {"kmeans-iters", kmeans_iters},
      {"ensemble", ensemble == EnsembleMode::Median ? "median" : "weighted"},
      {"weights", weights},
      {"deterministic", deterministic},
  };
  if (tau_easy) j["tau-easy"] = *tau_easy;
  if (tau_hard) j["tau-hard"] = *tau_hard;
  return j;
}

}  // namespace promptprobe
