#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "promptprobe/error.hpp"
#include "promptprobe/run_config.hpp"
#include "test_support.hpp"

using namespace promptprobe;

TEST_SUITE("run_config") {

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.lambda == 0.1);
  CHECK(c.vocab_size == 1000);
  CHECK(c.gamma == 0.001);
  CHECK(c.centroids == 10000);
  CHECK(c.lr == 1e-4);
  CHECK(c.batch == 64);
  CHECK(c.epochs == 3);
  CHECK(c.phase1_epochs() == 3);
}

TEST_CASE("set parses every key") {
  RunConfig c;
  c.set("lambda", "0.25");
  c.set("head-config", "embed-into-class");
  c.set("curriculum", "thresholds");
  c.set("tau-easy", "0.7");
  c.set("ensemble", "weighted");
  c.set("weights", "1, 2,3");
  c.set("deterministic", "true");
  c.set("scoring-epochs", "2");
  CHECK(c.lambda == 0.25);
  CHECK(c.head_config == HeadVariant::EmbedIntoClass);
  CHECK(c.curriculum == SplitHeuristic::Thresholds);
  CHECK(c.tau_easy == 0.7);
  CHECK_FALSE(c.tau_hard.has_value());
  CHECK(c.ensemble == EnsembleMode::WeightedAverage);
  CHECK(c.weights == std::vector<double>{1, 2, 3});
  CHECK(c.deterministic);
  CHECK(c.phase1_epochs() == 2);
  CHECK(c.is_set("lambda"));
  CHECK_FALSE(c.is_set("gamma"));
  for (const auto& k : RunConfig::keys()) CHECK(c.to_json().contains(k) == (k != "tau-hard"));
}

TEST_CASE("bad keys and values are rejected") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("learning-rate", "0.1"), InvalidArgument);
  CHECK_THROWS_AS(c.set("lr", "fast"), InvalidArgument);
  CHECK_THROWS_AS(c.set("batch", "0"), InvalidArgument);
  CHECK_THROWS_AS(c.set("batch", "-3"), InvalidArgument);
  CHECK_THROWS_AS(c.set("gamma", "0"), InvalidArgument);
  CHECK_THROWS_AS(c.set("head-config", "4"), InvalidArgument);
  CHECK_THROWS_AS(c.set("deterministic", "maybe"), InvalidArgument);
}

TEST_CASE("config file merging") {
  promptprobe::testing::TempDir dir("cfg");
  {
    std::ofstream out(dir / "run.cfg");
    out << "# pipeline settings\n\nlambda = 0.5\nepochs=5   # longer\ncentroids = 50\n";
  }
  RunConfig c;
  c.merge_file(dir / "run.cfg");
  c.set("epochs", "2");  // flags are applied after the file
  CHECK(c.lambda == 0.5);
  CHECK(c.epochs == 2);
  CHECK(c.dakl(20).num_centroids == 50);

  {
    std::ofstream out(dir / "bad.cfg");
    out << "lambda = 0.5\nbogus = 1\n";
  }
  try {
    RunConfig d;
    d.merge_file(dir / "bad.cfg");
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& err) {
    CHECK(std::string(err.what()).find("bad.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig().merge_file(dir / "none.cfg"), IoError);
}

TEST_CASE("default centroid count is clipped to the sample count") {
  RunConfig c;
  CHECK(c.dakl(300).num_centroids == 300);
  CHECK(c.dakl(20000).num_centroids == 10000);
  const auto h = c.head(16, 8, 32);
  CHECK(h.learning_rate == 1e-4);
  CHECK(h.vocab_size == 32);
}

}  // TEST_SUITE
