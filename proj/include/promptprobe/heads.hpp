#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "promptprobe/dataio.hpp"
#include "promptprobe/vocab.hpp"

namespace promptprobe {

// How the vocabulary classification head is wired relative to the
// embedding head. Each head is a single fully connected layer.
enum class HeadVariant : std::uint32_t {
  Separate = 1,        // both heads read the image features
  ClassIntoEmbed = 2,  // embedding head reads [features, class probabilities]
  EmbedIntoClass = 3,  // classification head reads the predicted embedding
};

std::string_view to_string(HeadVariant v);
HeadVariant parse_head_variant(std::string_view name);

struct HeadConfig {
  HeadVariant variant = HeadVariant::Separate;
  std::size_t feature_dim = 1;
  std::size_t embed_dim = 1;
  std::size_t vocab_size = 1;
  double lambda = 0.1;
  double learning_rate = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 3;
  std::uint64_t seed = 0;
  // Fixed (sequential) gradient reduction order.
  bool deterministic = true;

  void validate() const;
};

// Lower bound on probabilities before taking logs.
inline constexpr double kProbClamp = 1e-7;

struct AdamDefaults {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;
};

// One set of tensors shaped like the model parameters. Used for the
// parameters themselves, their gradients and both Adam moments.
struct HeadTensors {
  Eigen::MatrixXd embed_weight;  // e x (d or d+m)
  Eigen::VectorXd embed_bias;    // e
  Eigen::MatrixXd class_weight;  // m x (d or e)
  Eigen::VectorXd class_bias;    // m

  static HeadTensors zeros_like(const HeadTensors& shape);

  HeadTensors& operator+=(const HeadTensors& other);
  HeadTensors& operator*=(double s);
  double squared_norm() const;
  bool all_finite() const;
  // Parameters concatenated in declaration order, column-major within each.
  Eigen::VectorXd flatten() const;
};

struct JointHeadModel {
  HeadVariant variant = HeadVariant::Separate;
  std::size_t feature_dim = 0;
  std::size_t embed_dim = 0;
  std::size_t vocab_size = 0;

  HeadTensors params;
  HeadTensors first_moment;
  HeadTensors second_moment;
  std::uint64_t step = 0;

  std::size_t embed_input_dim() const;
  std::size_t class_input_dim() const;

  bool operator==(const JointHeadModel& other) const;
};

// Weights uniform in +-1/sqrt(fan_in), zero biases, zero optimizer state.
JointHeadModel make_model(const HeadConfig& config);

struct ForwardOutput {
  Eigen::VectorXd embedding;
  Eigen::VectorXd probs;  // clamped to [kProbClamp, 1 - kProbClamp]
};

ForwardOutput forward(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// 1 - cos(pred, target); zero-norm inputs raise NumericError.
double cosine_loss(const Eigen::Ref<const Eigen::VectorXd>& pred,
                   const Eigen::Ref<const Eigen::VectorXd>& target);

// Mean binary cross-entropy over the vocabulary. Labels must be 0 or 1.
double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& probs,
                const Eigen::Ref<const Eigen::VectorXd>& labels);

double combined_loss(double cosine_term, double classification_term, double lambda);

// Value of the joint objective on one sample.
double sample_loss(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& target,
                   const Eigen::Ref<const Eigen::VectorXd>& labels, double lambda);

struct Gradients {
  HeadTensors grads;
  double loss = 0.0;
};

// Closed-form gradient of the joint objective for one sample. The
// classification term is differentiated through the logits, i.e. d/dz of
// BCE(sigmoid(z)) = sigmoid(z) - label; the probability clamp only guards
// the logarithm.
Gradients backward(const JointHeadModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& target,
                   const Eigen::Ref<const Eigen::VectorXd>& labels, double lambda);

// One Adam update with bias correction.
void adam_step(JointHeadModel& model, const HeadTensors& grads, double learning_rate);

// Row-aligned training arrays widened to double.
struct TrainingData {
  Eigen::MatrixXd features;  // n x d
  Eigen::MatrixXd targets;   // n x e
  Eigen::MatrixXd labels;    // n x m, 0/1

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }

  static TrainingData from(const FeatureMatrix& features, const FeatureMatrix& targets,
                           const LabelMatrix& labels);
};

struct TrainHistory {
  std::vector<double> epoch_loss;
  // epoch_cosines[k][i]: cosine of sample i after epoch k, from an
  // evaluation pass that does not update the model.
  std::vector<std::vector<double>> epoch_cosines;
  std::uint64_t steps = 0;
};

// Draws mini-batches from a pool of row indices in shuffled passes. The
// last batch of a pass may be short. Growing the pool starts a fresh pass.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  // No-op when the new pool equals the current one.
  void reset_pool(std::vector<std::size_t> pool);

  std::size_t pool_size() const { return pool_.size(); }
  std::size_t batches_per_pass() const { return (pool_.size() + batch_size_ - 1) / batch_size_; }

 private:
  void reshuffle();

  std::vector<std::size_t> pool_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
};

// Mean loss and mean gradient over the rows listed in `batch`.
Gradients batch_gradients(const JointHeadModel& model, const TrainingData& data,
                          const std::vector<std::size_t>& batch, const HeadConfig& config);

// Computes the batch gradient and applies one Adam update; returns the batch
// mean loss. `context` names the batch in the NumericError raised when the
// loss or gradient is not finite.
double train_step(JointHeadModel& model, const TrainingData& data,
                  const std::vector<std::size_t>& batch, const HeadConfig& config,
                  std::string_view context);

// Per-row cosine similarity between predicted and target embeddings.
std::vector<double> sample_cosines(const JointHeadModel& model, const TrainingData& data);

// Vanilla mini-batch training for config.epochs passes over the data.
TrainHistory train(JointHeadModel& model, const TrainingData& data, const HeadConfig& config);

TrainHistory train(JointHeadModel& model, const FeatureMatrix& features,
                   const FeatureMatrix& targets, const LabelMatrix& labels,
                   const HeadConfig& config);

// Seed for the batch shuffling stream, derived from the run seed so that the
// initialization and shuffling streams are independent.
std::uint64_t shuffle_seed(std::uint64_t seed);

// Binary checkpoint: "PPHD", u32 version, u32 variant, u32 d, u32 e, u32 m,
// u64 step, then 12 tensors (params, first moment, second moment) each as
// u32 rows, u32 cols, rows*cols f64 column-major. Little-endian.
void save_checkpoint(const JointHeadModel& model, const std::filesystem::path& path);
JointHeadModel load_checkpoint(const std::filesystem::path& path);

}  // namespace promptprobe
