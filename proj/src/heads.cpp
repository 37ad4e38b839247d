#include "promptprobe/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/parallel.hpp"

namespace promptprobe {

namespace {

constexpr std::string_view kCheckpointMagic = "PPHD";
constexpr std::uint32_t kCheckpointVersion = 1;

using Index = Eigen::Index;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// Every intermediate of one forward pass, kept for the backward pass.
struct Activations {
  Eigen::VectorXd embed_input;  // x, or [x, probs] for ClassIntoEmbed
  Eigen::VectorXd class_input;  // x, or the embedding for EmbedIntoClass
  Eigen::VectorXd embedding;
  Eigen::VectorXd sigm;   // unclamped sigmoid of the class logits
  Eigen::VectorXd probs;  // clamped
};

Eigen::VectorXd clamp_probs(const Eigen::VectorXd& s) {
  return s.cwiseMax(kProbClamp).cwiseMin(1.0 - kProbClamp);
}

Eigen::VectorXd apply_sigmoid(const Eigen::VectorXd& logits) {
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

Activations run_forward(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != model.feature_dim) {
    throw ShapeError("feature vector has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.feature_dim));
  }
  const auto& p = model.params;
  Activations a;
  switch (model.variant) {
    case HeadVariant::Separate:
      a.embed_input = x;
      a.class_input = x;
      a.embedding = p.embed_weight * x + p.embed_bias;
      a.sigm = apply_sigmoid(p.class_weight * x + p.class_bias);
      a.probs = clamp_probs(a.sigm);
      break;
    case HeadVariant::ClassIntoEmbed: {
      a.class_input = x;
      a.sigm = apply_sigmoid(p.class_weight * x + p.class_bias);
      a.probs = clamp_probs(a.sigm);
      a.embed_input.resize(x.size() + a.probs.size());
      a.embed_input << x, a.probs;
      a.embedding = p.embed_weight * a.embed_input + p.embed_bias;
      break;
    }
    case HeadVariant::EmbedIntoClass:
      a.embed_input = x;
      a.embedding = p.embed_weight * x + p.embed_bias;
      a.class_input = a.embedding;
      a.sigm = apply_sigmoid(p.class_weight * a.embedding + p.class_bias);
      a.probs = clamp_probs(a.sigm);
      break;
  }
  return a;
}

void check_labels(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& target,
                  const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (static_cast<std::size_t>(target.size()) != model.embed_dim) {
    throw ShapeError("target embedding has length " + std::to_string(target.size()) +
                     ", model expects " + std::to_string(model.embed_dim));
  }
  if (static_cast<std::size_t>(labels.size()) != model.vocab_size) {
    throw ShapeError("label vector has length " + std::to_string(labels.size()) +
                     ", model expects " + std::to_string(model.vocab_size));
  }
}

void init_uniform(Eigen::MatrixXd& w, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  // Row-major fill so the draw order matches the usual (out, in) layout.
  for (Index r = 0; r < w.rows(); ++r) {
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  }
}

template <typename F>
void for_each_tensor(HeadTensors& t, F&& f) {
  f(t.embed_weight);
  f(t.embed_bias);
  f(t.class_weight);
  f(t.class_bias);
}

template <typename F>
void for_each_tensor_pair(HeadTensors& a, const HeadTensors& b, F&& f) {
  f(a.embed_weight, b.embed_weight);
  f(a.embed_bias, b.embed_bias);
  f(a.class_weight, b.class_weight);
  f(a.class_bias, b.class_bias);
}

}  // namespace

std::string_view to_string(HeadVariant v) {
  switch (v) {
    case HeadVariant::Separate: return "separate";
    case HeadVariant::ClassIntoEmbed: return "class-into-embed";
    case HeadVariant::EmbedIntoClass: return "embed-into-class";
  }
  return "unknown";
}

HeadVariant parse_head_variant(std::string_view name) {
  if (name == "separate" || name == "1") return HeadVariant::Separate;
  if (name == "class-into-embed" || name == "2") return HeadVariant::ClassIntoEmbed;
  if (name == "embed-into-class" || name == "3") return HeadVariant::EmbedIntoClass;
  throw InvalidArgument("unknown head configuration '" + std::string(name) + "'");
}

void HeadConfig::validate() const {
  if (feature_dim == 0 || embed_dim == 0 || vocab_size == 0) {
    throw InvalidArgument("head dimensions must be at least 1");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be >= 0");
  }
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
}

HeadTensors HeadTensors::zeros_like(const HeadTensors& shape) {
  HeadTensors t;
  t.embed_weight = Eigen::MatrixXd::Zero(shape.embed_weight.rows(), shape.embed_weight.cols());
  t.embed_bias = Eigen::VectorXd::Zero(shape.embed_bias.size());
  t.class_weight = Eigen::MatrixXd::Zero(shape.class_weight.rows(), shape.class_weight.cols());
  t.class_bias = Eigen::VectorXd::Zero(shape.class_bias.size());
  return t;
}

HeadTensors& HeadTensors::operator+=(const HeadTensors& other) {
  for_each_tensor_pair(*this, other, [](auto& a, const auto& b) { a += b; });
  return *this;
}

HeadTensors& HeadTensors::operator*=(double s) {
  for_each_tensor(*this, [s](auto& a) { a *= s; });
  return *this;
}

double HeadTensors::squared_norm() const {
  return embed_weight.squaredNorm() + embed_bias.squaredNorm() + class_weight.squaredNorm() +
         class_bias.squaredNorm();
}

bool HeadTensors::all_finite() const {
  return embed_weight.allFinite() && embed_bias.allFinite() && class_weight.allFinite() &&
         class_bias.allFinite();
}

Eigen::VectorXd HeadTensors::flatten() const {
  Eigen::VectorXd out(embed_weight.size() + embed_bias.size() + class_weight.size() +
                      class_bias.size());
  out << embed_weight.reshaped(), embed_bias, class_weight.reshaped(), class_bias;
  return out;
}

std::size_t JointHeadModel::embed_input_dim() const {
  return variant == HeadVariant::ClassIntoEmbed ? feature_dim + vocab_size : feature_dim;
}

std::size_t JointHeadModel::class_input_dim() const {
  return variant == HeadVariant::EmbedIntoClass ? embed_dim : feature_dim;
}

bool JointHeadModel::operator==(const JointHeadModel& other) const {
  const auto same = [](const HeadTensors& a, const HeadTensors& b) {
    return a.embed_weight == b.embed_weight && a.embed_bias == b.embed_bias &&
           a.class_weight == b.class_weight && a.class_bias == b.class_bias;
  };
  return variant == other.variant && feature_dim == other.feature_dim &&
         embed_dim == other.embed_dim && vocab_size == other.vocab_size && step == other.step &&
         same(params, other.params) && same(first_moment, other.first_moment) &&
         same(second_moment, other.second_moment);
}

JointHeadModel make_model(const HeadConfig& config) {
  config.validate();
  JointHeadModel model;
  model.variant = config.variant;
  model.feature_dim = config.feature_dim;
  model.embed_dim = config.embed_dim;
  model.vocab_size = config.vocab_size;

  const auto e = static_cast<Index>(model.embed_dim);
  const auto m = static_cast<Index>(model.vocab_size);
  auto& p = model.params;
  p.embed_weight.resize(e, static_cast<Index>(model.embed_input_dim()));
  p.embed_bias = Eigen::VectorXd::Zero(e);
  p.class_weight.resize(m, static_cast<Index>(model.class_input_dim()));
  p.class_bias = Eigen::VectorXd::Zero(m);

  std::mt19937_64 rng(config.seed);
  init_uniform(p.embed_weight, rng);
  init_uniform(p.class_weight, rng);

  model.first_moment = HeadTensors::zeros_like(p);
  model.second_moment = HeadTensors::zeros_like(p);
  return model;
}

ForwardOutput forward(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  auto a = run_forward(model, x);
  return {std::move(a.embedding), std::move(a.probs)};
}

double cosine_loss(const Eigen::Ref<const Eigen::VectorXd>& pred,
                   const Eigen::Ref<const Eigen::VectorXd>& target) {
  if (pred.size() != target.size()) {
    throw ShapeError("cosine loss on vectors of length " + std::to_string(pred.size()) + " and " +
                     std::to_string(target.size()));
  }
  const double np = pred.norm();
  const double nt = target.norm();
  if (np == 0.0) throw NumericError("predicted embedding has zero norm");
  if (nt == 0.0) throw NumericError("target embedding has zero norm");
  return 1.0 - pred.dot(target) / (np * nt);
}

double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& probs,
                const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (probs.size() != labels.size()) {
    throw ShapeError("BCE on vectors of length " + std::to_string(probs.size()) + " and " +
                     std::to_string(labels.size()));
  }
  if (probs.size() == 0) return 0.0;
  double total = 0.0;
  for (Index j = 0; j < probs.size(); ++j) {
    const double q = std::clamp(probs[j], kProbClamp, 1.0 - kProbClamp);
    const double l = labels[j];
    total -= l * std::log(q) + (1.0 - l) * std::log(1.0 - q);
  }
  return total / static_cast<double>(probs.size());
}

double combined_loss(double cosine_term, double classification_term, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  return cosine_term + lambda * classification_term;
}

double sample_loss(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& target,
                   const Eigen::Ref<const Eigen::VectorXd>& labels, double lambda) {
  check_labels(model, target, labels);
  const auto a = run_forward(model, x);
  return combined_loss(cosine_loss(a.embedding, target), bce_loss(a.probs, labels), lambda);
}

Gradients backward(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& target,
                   const Eigen::Ref<const Eigen::VectorXd>& labels, double lambda) {
  check_labels(model, target, labels);
  const auto a = run_forward(model, x);
  const auto& p = model.params;

  Gradients out;
  out.loss = combined_loss(cosine_loss(a.embedding, target), bce_loss(a.probs, labels), lambda);

  // d(1 - cos)/d pred = -(t / (|p||t|) - cos * p / |p|^2)
  const double np = a.embedding.norm();
  const double nt = target.norm();
  const double cos = a.embedding.dot(target) / (np * nt);
  Eigen::VectorXd grad_embedding = -(target / (np * nt) - (cos / (np * np)) * a.embedding);

  // d(lambda * mean BCE)/d logits
  const double scale = lambda / static_cast<double>(model.vocab_size);
  Eigen::VectorXd grad_logits = scale * (a.sigm - labels);

  auto& g = out.grads;
  switch (model.variant) {
    case HeadVariant::Separate:
      break;
    case HeadVariant::ClassIntoEmbed: {
      // The embedding head also pulls on the class logits through the
      // concatenated probabilities.
      const auto m = static_cast<Index>(model.vocab_size);
      Eigen::VectorXd grad_probs = p.embed_weight.rightCols(m).transpose() * grad_embedding;
      grad_logits.array() += grad_probs.array() * a.sigm.array() * (1.0 - a.sigm.array());
      break;
    }
    case HeadVariant::EmbedIntoClass:
      // Classification error flows back into the embedding head.
      grad_embedding += p.class_weight.transpose() * grad_logits;
      break;
  }

  g.embed_weight = grad_embedding * a.embed_input.transpose();
  g.embed_bias = grad_embedding;
  g.class_weight = grad_logits * a.class_input.transpose();
  g.class_bias = grad_logits;

  if (!std::isfinite(out.loss) || !g.all_finite()) {
    throw NumericError("non-finite loss or gradient");
  }
  return out;
}

void adam_step(JointHeadModel& model, const HeadTensors& grads, double learning_rate) {
  using A = AdamDefaults;
  model.step += 1;
  const double t = static_cast<double>(model.step);
  const double correction1 = 1.0 - std::pow(A::beta1, t);
  const double correction2 = 1.0 - std::pow(A::beta2, t);

  const auto update = [&](auto& param, auto& m1, auto& m2, const auto& g) {
    m1 = A::beta1 * m1 + (1.0 - A::beta1) * g;
    m2 = A::beta2 * m2 + (1.0 - A::beta2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m1.array() / correction1) /
                     ((m2.array() / correction2).sqrt() + A::epsilon);
  };
  auto& p = model.params;
  auto& m1 = model.first_moment;
  auto& m2 = model.second_moment;
  update(p.embed_weight, m1.embed_weight, m2.embed_weight, grads.embed_weight);
  update(p.embed_bias, m1.embed_bias, m2.embed_bias, grads.embed_bias);
  update(p.class_weight, m1.class_weight, m2.class_weight, grads.class_weight);
  update(p.class_bias, m1.class_bias, m2.class_bias, grads.class_bias);
}

TrainingData TrainingData::from(const FeatureMatrix& features, const FeatureMatrix& targets,
                                const LabelMatrix& labels) {
  if (features.rows() != targets.rows() || features.rows() != labels.rows()) {
    throw ShapeError("training arrays are not row-aligned: " + std::to_string(features.rows()) +
                     " features, " + std::to_string(targets.rows()) + " targets, " +
                     std::to_string(labels.rows()) + " label rows");
  }
  return {features.to_eigen(), targets.to_eigen(), labels.to_eigen()};
}

BatchStream::BatchStream(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed)
    : pool_(std::move(pool)), batch_size_(batch_size), rng_(seed) {
  if (batch_size_ == 0) throw InvalidArgument("batch size must be at least 1");
  if (pool_.empty()) throw InvalidArgument("batch stream needs a non-empty pool");
  reshuffle();
}

void BatchStream::reshuffle() {
  order_ = pool_;
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchStream::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return batch;
}

void BatchStream::reset_pool(std::vector<std::size_t> pool) {
  if (pool == pool_) return;
  if (pool.empty()) throw InvalidArgument("batch stream needs a non-empty pool");
  pool_ = std::move(pool);
  reshuffle();
}

Gradients batch_gradients(const JointHeadModel& model, const TrainingData& data,
                          const std::vector<std::size_t>& batch, const HeadConfig& config) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  const auto accumulate = [&](std::size_t begin, std::size_t end) {
    Gradients acc{HeadTensors::zeros_like(model.params), 0.0};
    for (std::size_t k = begin; k < end; ++k) {
      const auto i = static_cast<Index>(batch[k]);
      auto g = backward(model, data.features.row(i).transpose(), data.targets.row(i).transpose(),
                        data.labels.row(i).transpose(), config.lambda);
      acc.grads += g.grads;
      acc.loss += g.loss;
    }
    return acc;
  };

  Gradients total;
  const std::size_t workers = config.deterministic ? 1 : std::min(worker_count(), batch.size());
  if (workers <= 1) {
    total = accumulate(0, batch.size());
  } else {
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    std::vector<Gradients> partial((batch.size() + chunk - 1) / chunk);
    parallel_for(batch.size(), workers, [&](std::size_t begin, std::size_t end) {
      partial[begin / chunk] = accumulate(begin, end);
    });
    total = std::move(partial.front());
    for (std::size_t s = 1; s < partial.size(); ++s) {
      total.grads += partial[s].grads;
      total.loss += partial[s].loss;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.grads *= inv;
  total.loss *= inv;
  return total;
}

double train_step(JointHeadModel& model, const TrainingData& data,
                  const std::vector<std::size_t>& batch, const HeadConfig& config,
                  std::string_view context) {
  Gradients g;
  try {
    g = batch_gradients(model, data, batch, config);
  } catch (const NumericError& err) {
    throw NumericError(std::string(context) + ": " + err.what());
  }
  adam_step(model, g.grads, config.learning_rate);
  if (!model.params.all_finite()) {
    throw NumericError(std::string(context) + ": parameters became non-finite");
  }
  return g.loss;
}

std::vector<double> sample_cosines(const JointHeadModel& model, const TrainingData& data) {
  std::vector<double> out(data.size());
  parallel_for(data.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = static_cast<Index>(i);
      const auto a = run_forward(model, data.features.row(row).transpose());
      out[i] = 1.0 - cosine_loss(a.embedding, data.targets.row(row).transpose());
    }
  });
  return out;
}

std::uint64_t shuffle_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

TrainHistory train(JointHeadModel& model, const TrainingData& data, const HeadConfig& config) {
  config.validate();
  if (data.size() == 0) throw InvalidArgument("no training samples");
  if (static_cast<std::size_t>(data.features.cols()) != model.feature_dim ||
      static_cast<std::size_t>(data.targets.cols()) != model.embed_dim ||
      static_cast<std::size_t>(data.labels.cols()) != model.vocab_size) {
    throw ShapeError("training data dimensions do not match the model");
  }

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  BatchStream stream(std::move(all), config.batch_size, shuffle_seed(config.seed));

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double weighted = 0.0;
    const std::size_t batches = stream.batches_per_pass();
    for (std::size_t b = 0; b < batches; ++b) {
      const auto batch = stream.next();
      const auto context = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b);
      weighted += train_step(model, data, batch, config, context) * static_cast<double>(batch.size());
      ++history.steps;
    }
    history.epoch_loss.push_back(weighted / static_cast<double>(data.size()));
    history.epoch_cosines.push_back(sample_cosines(model, data));
  }
  return history;
}

TrainHistory train(JointHeadModel& model, const FeatureMatrix& features,
                   const FeatureMatrix& targets, const LabelMatrix& labels,
                   const HeadConfig& config) {
  return train(model, TrainingData::from(features, targets, labels), config);
}

void save_checkpoint(const JointHeadModel& model, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  out.bytes(kCheckpointMagic);
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(model.variant));
  out.u32(static_cast<std::uint32_t>(model.feature_dim));
  out.u32(static_cast<std::uint32_t>(model.embed_dim));
  out.u32(static_cast<std::uint32_t>(model.vocab_size));
  out.u64(model.step);
  const auto write_tensor = [&out](const auto& t) {
    out.u32(static_cast<std::uint32_t>(t.rows()));
    out.u32(static_cast<std::uint32_t>(t.cols()));
    for (Index k = 0; k < t.size(); ++k) out.f64(t.data()[k]);
  };
  for (const auto* set : {&model.params, &model.first_moment, &model.second_moment}) {
    write_tensor(set->embed_weight);
    write_tensor(set->embed_bias);
    write_tensor(set->class_weight);
    write_tensor(set->class_bias);
  }
  out.finish();
}

JointHeadModel load_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  if (in.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError("'" + path.string() + "' is not a head checkpoint");
  }
  if (const auto version = in.u32(); version != kCheckpointVersion) {
    throw FormatError("'" + path.string() + "' has unsupported checkpoint version " +
                      std::to_string(version));
  }
  JointHeadModel model;
  const auto tag = in.u32();
  if (tag < 1 || tag > 3) throw FormatError("'" + path.string() + "' has unknown head variant");
  model.variant = static_cast<HeadVariant>(tag);
  model.feature_dim = in.u32();
  model.embed_dim = in.u32();
  model.vocab_size = in.u32();
  model.step = in.u64();

  const auto e = static_cast<Index>(model.embed_dim);
  const auto m = static_cast<Index>(model.vocab_size);
  const auto read_tensor = [&](auto& t, Index rows, Index cols) {
    const auto r = in.u32();
    const auto c = in.u32();
    if (r != rows || c != cols) {
      throw FormatError("'" + path.string() + "' tensor shape does not match its header");
    }
    t.resize(rows * cols);
    for (Index k = 0; k < t.size(); ++k) t.data()[k] = in.f64();
  };
  const auto read_matrix = [&](Eigen::MatrixXd& t, Index rows, Index cols) {
    t.resize(rows, cols);
    Eigen::VectorXd flat;
    read_tensor(flat, rows, cols);
    t = flat.reshaped(rows, cols);
  };
  for (auto* set : {&model.params, &model.first_moment, &model.second_moment}) {
    read_matrix(set->embed_weight, e, static_cast<Index>(model.embed_input_dim()));
    read_tensor(set->embed_bias, e, 1);
    read_matrix(set->class_weight, m, static_cast<Index>(model.class_input_dim()));
    read_tensor(set->class_bias, m, 1);
  }
  if (!in.at_end()) throw FormatError("'" + path.string() + "' has trailing bytes");
  if (!model.params.all_finite()) throw DataError("'" + path.string() + "' has non-finite weights");
  return model;
}

}  // namespace promptprobe
