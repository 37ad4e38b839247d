// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "cli_runner.hpp"
#include "filter_fixture.hpp"
#include "oracles.hpp"
#include "promptprobe/dakl.hpp"
#include "promptprobe/dataio.hpp"
#include "promptprobe/heads.hpp"
#include "scenarios.hpp"

using namespace promptprobe;
using namespace promptprobe::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream timing;
  timing.precision(2);
  timing << std::fixed << secs << "s";
  if (budget_s > 0.0) {
    timing << " of " << budget_s << "s";
    if (secs > budget_s) {
      o.pass = false;
      o.detail += " (over time budget)";
    }
  }
  if (!o.pass) ++failures;
  std::printf("%s  %s  [%s] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), timing.str().c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

CentroidSet as_centroids(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  CentroidSet c;
  c.centers = x;
  c.targets = y;
  c.assignment.resize(static_cast<std::size_t>(x.rows()));
  std::iota(c.assignment.begin(), c.assignment.end(), std::size_t{0});
  return c;
}

DaklConfig dakl_config(double gamma, double ridge) {
  DaklConfig c;
  c.gamma = gamma;
  c.ridge = ridge;
  return c;
}

const HeadVariant kVariants[] = {HeadVariant::Separate, HeadVariant::ClassIntoEmbed, HeadVariant::EmbedIntoClass};

}  // namespace

int main() {
  criterion("gradient check: 100 instances per head variant, rel err < 1e-4", 10.0, [] {
    double worst = 0.0;
    for (auto v : kVariants) {
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        worst = std::max(worst, gradient_relative_error(random_gradient_instance(v, seed)));
      }
    }
    return Outcome{worst < 1e-4, "worst " + fmt(worst)};
  });

  criterion("dual ridge equals primal ridge on 50 instances (< 1e-8)", 5.0, [] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed);
      const Eigen::MatrixXd x = random_matrix(20, 5, rng);
      const Eigen::MatrixXd y = random_matrix(20, 2, rng);
      const Eigen::MatrixXd pool = random_matrix(static_cast<Eigen::Index>(seed % 4), 5, rng);
      const double ridge = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
      const auto reg = DaklRegressor::fit(as_centroids(x, y), pool, dakl_config(0.5, ridge));
      const Eigen::MatrixXd w = primal_ridge(reg.centroid_features(), y, ridge);
      const Eigen::MatrixXd q = random_matrix(7, 5, rng);
      worst = std::max(worst, (reg.predict(q) - reg.second_order_features(q) * w).cwiseAbs().maxCoeff());
    }
    return Outcome{worst < 1e-8, "worst " + fmt(worst)};
  });

  criterion("kernel pipeline equals naive reimplementation (< 1e-10)", 5.0, [] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (double gamma : {0.001, 1.0}) {
        std::mt19937_64 rng(seed);
        const Eigen::MatrixXd x = random_matrix(30, 6, rng);
        const Eigen::MatrixXd y = random_matrix(30, 3, rng);
        const Eigen::MatrixXd target = random_matrix(8, 6, rng, 1.5);
        const auto reg = DaklRegressor::fit(as_centroids(x, y), target, dakl_config(gamma, 1.0));
        const auto want = naive_dakl_predict(to_rows(x), to_rows(y), to_rows(target), to_rows(target), gamma, 1.0);
        worst = std::max(worst, max_abs_diff(reg.predict(target), want));
      }
    }
    return Outcome{worst < 1e-10, "worst " + fmt(worst)};
  });

  criterion("kernel invariants: unit diagonal, K_DA = 1 on it, rescale invariance", 0.0, [] {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd z = random_matrix(25, 5, rng);
    const Eigen::MatrixXd khat = normalize_kernel(kernel_matrix(z, z));
    const double diag_err = (khat.diagonal().array() - 1.0).abs().maxCoeff();
    const Eigen::MatrixXd kda = rbf_transform(khat, 0.7);
    const double kda_err = (kda.diagonal().array() - 1.0).abs().maxCoeff();

    std::uniform_real_distribution<double> s(0.1, 10.0);
    Eigen::MatrixXd scaled = z;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= s(rng);
    const double resc = (normalize_kernel(kernel_matrix(scaled, scaled)) - khat).cwiseAbs().maxCoeff();
    return Outcome{diag_err < 1e-12 && kda_err < 1e-12 && resc < 1e-9,
                   "diag " + fmt(diag_err) + ", K_DA " + fmt(kda_err) + ", rescale " + fmt(resc)};
  });

  criterion("synthetic recovery: held-out mean cosine >= 0.99 for every variant", 30.0, [] {
    double worst = 1.0;
    for (auto v : kVariants) worst = std::min(worst, synthetic_recovery(v, 0));
    return Outcome{worst >= 0.99, "worst " + fmt(worst)};
  });

  criterion("difficulty scores: Spearman vs injected noise <= -0.5 on 5 seeds", 0.0, [] {
    double worst = -1.0;
    std::string all;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const double rho = difficulty_spearman(seed);
      worst = std::max(worst, rho);
      all += (seed ? ", " : "") + fmt(rho);
    }
    return Outcome{worst <= -0.5, "rho " + all};
  });

  criterion("curriculum non-degradation: median(curriculum - vanilla) >= -0.01 over 5 seeds", 0.0, [] {
    std::vector<double> diffs;
    std::string all;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto run = noisy_paired_run(seed, SplitHeuristic::EqualThirds);
      diffs.push_back(run.curriculum - run.vanilla);
      all += (seed ? ", " : "") + fmt(diffs.back());
    }
    const double med = median(diffs);
    return Outcome{med >= -0.01, "median " + fmt(med) + " (" + all + ")"};
  });

  criterion("EmbedIntoClass: classification loss moves the embedding head", 0.0, [] {
    double smallest = 1e300;
    double separate = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto c = random_gradient_instance(HeadVariant::EmbedIntoClass, seed);
      const auto a = backward(c.model, c.x, c.target, c.labels, 0.5).grads;
      const auto b = backward(c.model, c.x, c.target, c.labels, 0.0).grads;
      smallest = std::min(smallest, (a.embed_weight - b.embed_weight).norm());
      const auto s = random_gradient_instance(HeadVariant::Separate, seed);
      const auto sa = backward(s.model, s.x, s.target, s.labels, 0.5).grads;
      const auto sb = backward(s.model, s.x, s.target, s.labels, 0.0).grads;
      separate = std::max(separate, (sa.embed_weight - sb.embed_weight).norm());
    }
    return Outcome{smallest > 1e-8 && separate == 0.0,
                   "coupled min " + fmt(smallest) + ", separate max " + fmt(separate)};
  });

  criterion("prompt filter matches the reference on the fixture", 0.0, [] {
    const auto fixture = filter_fixture();
    const auto got = filter_prompts(fixture);
    const bool same = got.kept == reference_filter(fixture);
    const auto& r = got.report;
    const bool counts = r.kept + r.total_dropped() == fixture.size();
    return Outcome{same && counts, "kept " + std::to_string(r.kept) + " of " + std::to_string(fixture.size())};
  });

  criterion("combined loss spot checks", 0.0, [] {
    const bool ok = combined_loss(0.5, 1.0, 0.1) == 0.6 && combined_loss(0.5, 7.0, 0.0) == 0.5 &&
                    std::abs(cosine_loss(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) - 1.0) < 1e-15 &&
                    std::abs(bce_loss(Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Ones(1)) - std::log(2.0)) <
                        1e-12;
    return Outcome{ok, ""};
  });

  criterion("CLI: deterministic reruns are byte-identical", 0.0, [] {
    TempDir dir("acceptance_cli");
    const auto synth = run_cli(dir, "synth --out " + q(dir / "data") + " --n 400 --noise-fraction 0.2 --seed 2");
    if (synth.status != 0) return Outcome{false, "synth: " + synth.err};
    const std::string inputs = " --features " + q(dir / "data/features.fmat") + " --targets " +
                               q(dir / "data/targets.fmat") + " --prompts " + q(dir / "data/prompts.jsonl") +
                               " --vocab-size 32 --lr 0.01 --deterministic --out ";
    for (const char* out : {"a", "b"}) {
      for (const char* cmd : {"train", "curriculum"}) {
        const auto r = run_cli(dir, std::string(cmd) + inputs + q(dir / (std::string(out) + cmd)));
        if (r.status != 0) return Outcome{false, std::string(cmd) + ": " + r.err};
      }
      const auto r = run_cli(dir, "dakl --deterministic --features " + q(dir / "data/targets.fmat") + " --targets " +
                                      q(dir / "data/targets.fmat") + " --centroids 30 --out " +
                                      q(dir / (std::string(out) + ".ppdk")));
      if (r.status != 0) return Outcome{false, "dakl: " + r.err};
    }
    for (const char* f : {"train/model.pphd", "train/history.json", "curriculum/model.pphd",
                          "curriculum/schedule.json", "curriculum/scores.fmat", ".ppdk"}) {
      if (read_bytes(dir / (std::string("a") + f)) != read_bytes(dir / (std::string("b") + f))) {
        return Outcome{false, std::string("differs: ") + f};
      }
    }
    return Outcome{true, "train, curriculum, dakl"};
  });

  std::printf("N/A   published benchmark tables: need the full prompt/image corpus and pretrained encoders\n");
  std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
  return failures == 0 ? 0 : 1;
}
