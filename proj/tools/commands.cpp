#include "commands.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "promptprobe/curriculum.hpp"
#include "promptprobe/dakl.hpp"
#include "promptprobe/dataio.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/evalkit.hpp"
#include "promptprobe/heads.hpp"
#include "promptprobe/synth.hpp"
#include "promptprobe/vocab.hpp"

namespace promptprobe::cli {

namespace {

using nlohmann::json;

void write_json(const Path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void ensure_dir(const Path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string read_magic(const Path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string magic(4, '\0');
  in.read(magic.data(), 4);
  if (in.gcount() != 4) throw FormatError("'" + path.string() + "' is too short to be a checkpoint");
  return magic;
}

// Rows of `m` in the order given by `ids`.
Eigen::MatrixXd rows_by_id(const FeatureMatrix& m, const std::vector<std::uint64_t>& ids,
                           const std::string& what) {
  if (m.row_ids() == ids) return m.to_eigen();
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < m.rows(); ++i) row_of.emplace(m.row_ids()[i], i);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto it = row_of.find(ids[k]);
    if (it == row_of.end()) throw DataError(what + " has no row for id " + std::to_string(ids[k]));
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = m.at(it->second, j);
    }
  }
  return out;
}

std::vector<PromptRecord> prompts_by_id(const std::vector<PromptRecord>& records,
                                        const std::vector<std::uint64_t>& ids, const Path& source) {
  std::unordered_map<std::uint64_t, const PromptRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);
  std::vector<PromptRecord> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("'" + source.string() + "' has no prompt for id " + std::to_string(id));
    }
    out.push_back(*it->second);
  }
  return out;
}

struct Combined {
  Eigen::MatrixXd values;
  std::vector<std::uint64_t> ids;
};

// Loads one or more row-aligned matrices and merges them with the ensemble
// combiner.
Combined load_combined(const std::vector<Path>& paths, const RunConfig& config) {
  if (paths.empty()) throw InvalidArgument("no feature files given");
  Combined out;
  std::vector<Eigen::MatrixXd> members;
  for (const auto& p : paths) {
    const auto m = load_matrix(p);
    if (members.empty()) {
      out.ids = m.row_ids();
    } else if (m.row_ids() != out.ids) {
      throw DataError("'" + p.string() + "' rows do not match '" + paths.front().string() + "'");
    }
    members.push_back(m.to_eigen());
  }
  out.values = members.size() == 1 ? std::move(members.front())
                                   : combine_ensemble(members, config.ensemble, config.weights);
  return out;
}

struct Prepared {
  TrainingData data;
  std::vector<std::uint64_t> ids;
  Vocabulary vocab;
};

Prepared prepare(const TrainArgs& args, const RunConfig& config) {
  const auto features = load_matrix(args.features);
  const auto targets = load_matrix(args.targets);
  const auto records = read_corpus(args.prompts);
  Prepared p;
  p.ids = features.row_ids();
  const auto prompts = prompts_by_id(records, p.ids, args.prompts);
  p.vocab = args.vocab ? Vocabulary::load(*args.vocab)
                       : build_vocabulary(prompts, config.vocab_size, default_stopwords());
  p.data = TrainingData{features.to_eigen(), rows_by_id(targets, p.ids, "'" + args.targets.string() + "'"),
                        make_label_matrix(prompts, p.vocab).to_eigen()};
  return p;
}

HeadConfig head_config(const Prepared& p, const RunConfig& config) {
  return config.head(static_cast<std::size_t>(p.data.features.cols()),
                     static_cast<std::size_t>(p.data.targets.cols()), p.vocab.size());
}

std::vector<double> mean_cosines(const TrainHistory& h) {
  std::vector<double> out;
  for (const auto& epoch : h.epoch_cosines) {
    double s = 0.0;
    for (double c : epoch) s += c;
    out.push_back(epoch.empty() ? 0.0 : s / static_cast<double>(epoch.size()));
  }
  return out;
}

struct HeadPrediction {
  Eigen::MatrixXd embeddings;
  Eigen::MatrixXd probs;
};

HeadPrediction predict_heads(const JointHeadModel& model, const Eigen::MatrixXd& x) {
  HeadPrediction out{Eigen::MatrixXd(x.rows(), static_cast<Eigen::Index>(model.embed_dim)),
                     Eigen::MatrixXd(x.rows(), static_cast<Eigen::Index>(model.vocab_size))};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto f = forward(model, x.row(i).transpose());
    out.embeddings.row(i) = f.embedding.transpose();
    out.probs.row(i) = f.probs.transpose();
  }
  return out;
}

Combined predict_any(const Path& model_path, const std::vector<Path>& features, const RunConfig& config,
                     std::string& kind, Eigen::MatrixXd* probs) {
  const auto magic = read_magic(model_path);
  Combined x = load_combined(features, config);
  if (magic == "PPHD") {
    if (features.size() != 1) throw InvalidArgument("a head checkpoint takes exactly one feature file");
    kind = "heads";
    auto pred = predict_heads(load_checkpoint(model_path), x.values);
    if (probs) *probs = std::move(pred.probs);
    return {std::move(pred.embeddings), std::move(x.ids)};
  }
  if (magic == "PPDK") {
    if (probs) throw InvalidArgument("a DAKL regressor does not predict vocabulary probabilities");
    kind = "dakl";
    return {DaklRegressor::load(model_path).predict(x.values), std::move(x.ids)};
  }
  throw FormatError("'" + model_path.string() + "' is neither a head checkpoint nor a DAKL regressor");
}

}  // namespace

void run_filter(const FilterArgs& args, std::ostream& out) {
  const auto result = filter_prompts(read_corpus(args.in));
  write_corpus(result.kept, args.out);
  const auto& r = result.report;
  const json report = {
      {"input", r.input},
      {"trimmed", r.trimmed},
      {"dropped_empty", r.dropped_empty},
      {"dropped_null_nan", r.dropped_null_nan},
      {"dropped_non_english", r.dropped_non_english},
      {"dropped_duplicate", r.dropped_duplicate},
      {"total_dropped", r.total_dropped()},
      {"kept", r.kept},
  };
  out << report.dump(2) << '\n';
}

void run_synth(const SynthArgs& args, std::ostream& out) {
  SynthSpec spec;
  spec.n = args.n;
  spec.d = args.d;
  spec.e = args.e;
  spec.m = args.m;
  spec.pool_size = args.pool;
  spec.shift = args.shift;
  spec.seed = args.seed;
  if (args.noise_fraction > 0.0) {
    spec.noise = noisy_fraction_profile(args.n, args.noise_fraction, args.noise_level, args.seed);
  }
  const auto data = generate(spec);

  ensure_dir(args.out_dir);
  save_matrix(data.features, args.out_dir / "features.fmat");
  save_matrix(data.targets, args.out_dir / "targets.fmat");
  write_corpus(data.prompts, args.out_dir / "prompts.jsonl");
  Vocabulary(data.words).save(args.out_dir / "words.txt");
  std::vector<float> noise(data.noise_levels.begin(), data.noise_levels.end());
  save_matrix(FeatureMatrix(args.n, 1, std::move(noise), data.features.row_ids()), args.out_dir / "noise.fmat");
  if (args.pool > 0) save_matrix(data.pool, args.out_dir / "pool.fmat");

  std::size_t noisy = 0;
  for (double s : data.noise_levels) noisy += s > 0.0 ? 1 : 0;
  const json report = {{"command", "synth"}, {"n", args.n},       {"d", args.d},
                       {"e", args.e},        {"m", args.m},       {"pool", args.pool},
                       {"noisy", noisy},     {"seed", args.seed}};
  out << report.dump(2) << '\n';
}

void run_train(const TrainArgs& args, const RunConfig& config, std::ostream& out) {
  const auto p = prepare(args, config);
  const auto head = head_config(p, config);
  auto model = make_model(head);
  const auto history = train(model, p.data, head);
  const auto scores = score_difficulty(history.epoch_cosines, p.ids);

  ensure_dir(args.out_dir);
  save_checkpoint(model, args.out_dir / "model.pphd");
  p.vocab.save(args.out_dir / "vocab.txt");
  save_matrix(scores_to_matrix(scores), args.out_dir / "scores.fmat");
  const json report = {
      {"command", "train"},
      {"samples", p.data.size()},
      {"vocab_size", p.vocab.size()},
      {"steps", history.steps},
      {"epoch_loss", history.epoch_loss},
      {"epoch_mean_cosine", mean_cosines(history)},
      {"config", config.to_json()},
  };
  write_json(args.out_dir / "history.json", report);
  out << report.dump(2) << '\n';
}

void run_curriculum(const CurriculumArgs& args, const RunConfig& config, std::ostream& out) {
  const auto p = prepare(args.data, config);
  const auto head = head_config(p, config);
  const std::size_t phase1 = config.phase1_epochs();
  const auto scores = args.scores ? scores_from_matrix(load_matrix(*args.scores))
                                  : score_by_training(p.data, p.ids, head, phase1);
  const auto schedule = make_schedule(scores, config.split());
  const auto budget = step_budget(p.data.size(), head.batch_size, phase1);
  const auto result = curriculum_train([&] { return make_model(head); }, p.data, p.ids, schedule, budget, head);

  ensure_dir(args.data.out_dir);
  save_checkpoint(result.model, args.data.out_dir / "model.pphd");
  p.vocab.save(args.data.out_dir / "vocab.txt");
  save_matrix(scores_to_matrix(scores), args.data.out_dir / "scores.fmat");
  write_json(args.data.out_dir / "schedule.json", schedule_to_json(schedule, result.history.boundaries, budget));
  const json report = {
      {"command", "curriculum"},
      {"samples", p.data.size()},
      {"vocab_size", p.vocab.size()},
      {"steps", result.history.steps},
      {"stage_boundaries", result.history.boundaries},
      {"stage_loss", result.history.stage_loss},
      {"chunk_sizes", {schedule.easy().size(), schedule.medium().size(), schedule.hard().size()}},
      {"config", config.to_json()},
  };
  write_json(args.data.out_dir / "history.json", report);
  out << report.dump(2) << '\n';
}

void run_dakl(const DaklArgs& args, const RunConfig& config, std::ostream& out) {
  const auto x = load_combined(args.features, config);
  const Eigen::MatrixXd y = rows_by_id(load_matrix(args.targets), x.ids, "'" + args.targets.string() + "'");
  const Eigen::MatrixXd pool =
      args.pool.empty() ? Eigen::MatrixXd(0, x.values.cols()) : load_combined(args.pool, config).values;

  const auto dk = config.dakl(static_cast<std::size_t>(x.values.rows()));
  const auto centroids = kmeans(x.values, y, dk.num_centroids, dk.kmeans_iters, dk.kmeans_seed);
  const auto reg = DaklRegressor::fit(centroids, pool, dk);
  reg.save(args.out);

  const json report = {
      {"command", "dakl"},
      {"samples", x.values.rows()},
      {"pool", pool.rows()},
      {"centroids", centroids.size()},
      {"kmeans_iterations", centroids.iterations},
      {"distortion", distortion(x.values, centroids)},
      {"config", config.to_json()},
  };
  out << report.dump(2) << '\n';
}

void run_predict(const PredictArgs& args, const RunConfig& config, std::ostream& out) {
  std::string kind;
  Eigen::MatrixXd probs;
  const auto pred = predict_any(args.model, args.features, config, kind, args.probs_out ? &probs : nullptr);
  save_matrix(FeatureMatrix::from_eigen(pred.values, pred.ids), args.out);
  if (args.probs_out) save_matrix(FeatureMatrix::from_eigen(probs, pred.ids), *args.probs_out);
  const json report = {{"command", "predict"}, {"model", kind}, {"rows", pred.values.rows()},
                       {"cols", pred.values.cols()}};
  out << report.dump(2) << '\n';
}

void run_eval(const EvalArgs& args, const RunConfig& config, std::ostream& out) {
  Combined pred;
  if (args.pred) {
    if (args.model) throw InvalidArgument("give either --pred or --model, not both");
    const auto m = load_matrix(*args.pred);
    pred = {m.to_eigen(), m.row_ids()};
  } else if (args.model) {
    std::string kind;
    pred = predict_any(*args.model, args.features, config, kind, nullptr);
  } else {
    throw InvalidArgument("eval needs --pred or --model with --features");
  }
  const auto targets = load_matrix(args.targets);
  if (targets.rows() != static_cast<std::size_t>(pred.values.rows()) ||
      targets.cols() != static_cast<std::size_t>(pred.values.cols())) {
    throw ShapeError("predictions are " + std::to_string(pred.values.rows()) + "x" +
                     std::to_string(pred.values.cols()) + " but targets are " + std::to_string(targets.rows()) +
                     "x" + std::to_string(targets.cols()));
  }
  const auto report = evaluate(pred.values, rows_by_id(targets, pred.ids, "'" + args.targets.string() + "'"));
  const json j = {{"n", report.n}, {"mean_cosine", report.mean_cosine}, {"ids", pred.ids},
                  {"per_sample", report.per_sample}};
  out << j.dump(2) << '\n';
}

void run_caption(const CaptionArgs& args, std::ostream& out) {
  const auto model = load_checkpoint(args.model);
  const auto vocab = Vocabulary::load(args.vocab);
  if (vocab.size() != model.vocab_size) {
    throw ShapeError("vocabulary has " + std::to_string(vocab.size()) + " tokens but the model predicts " +
                     std::to_string(model.vocab_size));
  }
  const auto queries = load_matrix(args.queries);
  const auto db = load_matrix(args.db);
  if (db.rows() == 0) throw InvalidArgument("caption database '" + args.db.string() + "' is empty");
  const auto prompts = prompts_by_id(read_corpus(args.prompts), db.row_ids(), args.prompts);
  const Eigen::MatrixXd db_values = db.to_eigen();
  const auto pred = predict_heads(model, queries.to_eigen());
  for (Eigen::Index i = 0; i < pred.embeddings.rows(); ++i) {
    const auto r = caption(pred.embeddings.row(i).transpose(), pred.probs.row(i).transpose(), db_values,
                           prompts, vocab);
    const json line = {
        {"query_id", queries.row_ids()[static_cast<std::size_t>(i)]},
        {"retrieved_id", r.retrieved_id},
        {"retrieved_prompt", r.retrieved_prompt},
        {"similarity", r.neighbor_similarity},
        {"appended_words", r.appended_words},
        {"caption", r.caption()},
    };
    out << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
}

}  // namespace promptprobe::cli
