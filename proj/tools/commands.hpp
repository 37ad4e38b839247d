#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "promptprobe/run_config.hpp"

namespace promptprobe::cli {

using Path = std::filesystem::path;

struct FilterArgs {
  Path in;
  Path out;
};

struct SynthArgs {
  Path out_dir;
  std::size_t n = 1000;
  std::size_t d = 16;
  std::size_t e = 8;
  std::size_t m = 32;
  double noise_fraction = 0.0;
  double noise_level = 2.0;
  std::size_t pool = 0;
  double shift = 0.0;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  Path features;
  Path targets;
  Path prompts;
  Path out_dir;
  std::optional<Path> vocab;
};

struct CurriculumArgs {
  TrainArgs data;
  std::optional<Path> scores;
};

struct DaklArgs {
  std::vector<Path> features;
  Path targets;
  std::vector<Path> pool;
  Path out;
};

struct PredictArgs {
  Path model;
  std::vector<Path> features;
  Path out;
  std::optional<Path> probs_out;
};

struct EvalArgs {
  std::optional<Path> pred;
  std::optional<Path> model;
  std::vector<Path> features;
  Path targets;
};

struct CaptionArgs {
  Path model;
  Path queries;
  Path db;
  Path prompts;
  Path vocab;
};

// Each command writes its files, prints its JSON report to `out`, and
// throws on failure.
void run_filter(const FilterArgs& args, std::ostream& out);
void run_synth(const SynthArgs& args, std::ostream& out);
void run_train(const TrainArgs& args, const RunConfig& config, std::ostream& out);
void run_curriculum(const CurriculumArgs& args, const RunConfig& config, std::ostream& out);
void run_dakl(const DaklArgs& args, const RunConfig& config, std::ostream& out);
void run_predict(const PredictArgs& args, const RunConfig& config, std::ostream& out);
void run_eval(const EvalArgs& args, const RunConfig& config, std::ostream& out);
void run_caption(const CaptionArgs& args, std::ostream& out);

}  // namespace promptprobe::cli
