#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using promptprobe::RunConfig;
namespace cli = promptprobe::cli;

const std::map<std::string, std::string>& tunable_help() {
  static const std::map<std::string, std::string> help = {
      {"lambda", "weight of the vocabulary classification loss (default 0.1)"},
      {"vocab-size", "vocabulary size m (default 1000)"},
      {"head-config", "separate | class-into-embed | embed-into-class (default separate)"},
      {"lr", "Adam learning rate (default 1e-4)"},
      {"batch", "mini-batch size (default 64)"},
      {"epochs", "training epochs (default 3)"},
      {"seed", "seed for initialization, shuffling and k-means (default 0)"},
      {"curriculum", "equal | thresholds (default equal)"},
      {"tau-easy", "easy threshold (default: 40th score percentile)"},
      {"tau-hard", "hard threshold (default: 10th score percentile)"},
      {"scoring-epochs", "epochs of the difficulty-scoring pass (default: --epochs)"},
      {"gamma", "RBF gamma (default 0.001)"},
      {"ridge", "ridge penalty (default 1)"},
      {"centroids", "k-means centroids (default 10000, clipped to the sample count)"},
      {"kmeans-iters", "maximum Lloyd iterations (default 100)"},
      {"ensemble", "median | weighted, for several feature files (default median)"},
      {"weights", "comma-separated ensemble weights"},
  };
  return help;
}

// Hyperparameter flags shared by the model commands. Values are applied on
// top of the optional --config file.
struct Tunables {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_file;
  bool deterministic = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value file; flags override it")->check(CLI::ExistingFile);
    for (const auto& [key, text] : tunable_help()) {
      options[key] = app->add_option("--" + key, values[key], text);
    }
    app->add_flag("--deterministic", deterministic, "fixed reduction order; byte-identical reruns");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) c.merge_file(config_file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) c.set(key, values.at(key));
    }
    if (deterministic) c.set("deterministic", "true");
    return c;
  }
};

void add_training_inputs(CLI::App* app, cli::TrainArgs& a) {
  app->add_option("--features", a.features, "feature matrix (FMAT)")->required();
  app->add_option("--targets", a.targets, "target embedding matrix (FMAT)")->required();
  app->add_option("--prompts", a.prompts, "prompt corpus (JSONL)")->required();
  app->add_option("--out", a.out_dir, "output directory")->required();
  app->add_option("--vocab", a.vocab, "reuse this vocabulary instead of building one");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptprobe: prompt-embedding prediction from image features"};
  app.require_subcommand(1);

  cli::FilterArgs filter_args;
  auto* filter = app.add_subcommand("filter", "clean a prompt corpus; prints the filter report");
  filter->add_option("--in", filter_args.in, "input corpus (JSONL)")->required();
  filter->add_option("--out", filter_args.out, "surviving prompts (JSONL)")->required();

  cli::SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--n", synth_args.n, "samples");
  synth->add_option("--d", synth_args.d, "feature dimension");
  synth->add_option("--e", synth_args.e, "embedding dimension");
  synth->add_option("--m", synth_args.m, "synthetic vocabulary size");
  synth->add_option("--noise-fraction", synth_args.noise_fraction, "fraction of noisy targets");
  synth->add_option("--noise-level", synth_args.noise_level, "noise magnitude of the noisy targets");
  synth->add_option("--pool", synth_args.pool, "unlabeled target-domain samples");
  synth->add_option("--shift", synth_args.shift, "mean offset of the target-domain pool");
  synth->add_option("--seed", synth_args.seed, "seed");

  Tunables train_tun;
  cli::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the joint embedding/vocabulary heads");
  add_training_inputs(train, train_args);
  train_tun.attach(train);

  Tunables cur_tun;
  cli::CurriculumArgs cur_args;
  auto* curriculum = app.add_subcommand("curriculum", "score difficulty, then retrain easy to hard");
  add_training_inputs(curriculum, cur_args.data);
  curriculum->add_option("--scores", cur_args.scores, "precomputed difficulty scores (FMAT), skips scoring");
  cur_tun.attach(curriculum);

  Tunables dakl_tun;
  cli::DaklArgs dakl_args;
  auto* dakl = app.add_subcommand("dakl", "fit the domain-adaptive kernel regressor");
  dakl->add_option("--features", dakl_args.features, "predicted embeddings per model (FMAT)")->required();
  dakl->add_option("--targets", dakl_args.targets, "target embeddings (FMAT)")->required();
  dakl->add_option("--pool", dakl_args.pool, "unlabeled target-domain inputs per model (FMAT)");
  dakl->add_option("--out", dakl_args.out, "regressor file")->required();
  dakl_tun.attach(dakl);

  Tunables predict_tun;
  cli::PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "predict embeddings with a head checkpoint or regressor");
  predict->add_option("--model", predict_args.model, "model.pphd or regressor file")->required();
  predict->add_option("--features", predict_args.features, "input matrices (FMAT)")->required();
  predict->add_option("--out", predict_args.out, "predicted embeddings (FMAT)")->required();
  predict->add_option("--probs-out", predict_args.probs_out, "vocabulary probabilities (FMAT)");
  predict_tun.attach(predict);

  Tunables eval_tun;
  cli::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "mean cosine similarity against targets");
  eval->add_option("--pred", eval_args.pred, "predicted embeddings (FMAT)");
  eval->add_option("--model", eval_args.model, "model.pphd or regressor file");
  eval->add_option("--features", eval_args.features, "model inputs (FMAT)");
  eval->add_option("--targets", eval_args.targets, "target embeddings (FMAT)")->required();
  eval_tun.attach(eval);

  cli::CaptionArgs caption_args;
  auto* caption = app.add_subcommand("caption", "retrieve a prompt and append predicted words");
  caption->add_option("--model", caption_args.model, "model.pphd")->required();
  caption->add_option("--features", caption_args.queries, "query features (FMAT)")->required();
  caption->add_option("--db", caption_args.db, "prompt embedding database (FMAT)")->required();
  caption->add_option("--prompts", caption_args.prompts, "prompts of the database rows (JSONL)")->required();
  caption->add_option("--vocab", caption_args.vocab, "vocabulary of the model")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (filter->parsed()) cli::run_filter(filter_args, std::cout);
    if (synth->parsed()) cli::run_synth(synth_args, std::cout);
    if (train->parsed()) cli::run_train(train_args, train_tun.resolve(), std::cout);
    if (curriculum->parsed()) cli::run_curriculum(cur_args, cur_tun.resolve(), std::cout);
    if (dakl->parsed()) cli::run_dakl(dakl_args, dakl_tun.resolve(), std::cout);
    if (predict->parsed()) cli::run_predict(predict_args, predict_tun.resolve(), std::cout);
    if (eval->parsed()) cli::run_eval(eval_args, eval_tun.resolve(), std::cout);
    if (caption->parsed()) cli::run_caption(caption_args, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout.flush();
  return std::cout ? 0 : 1;
}
