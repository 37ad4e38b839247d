#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace promptprobe {

// Domain-adaptive kernel learning: second-order features are rows of
//   K_DA = exp(-gamma * (1 - K_ij / sqrt(K_ii K_jj))),  K = Z Z^T,
// over a reference set Z of training centroids plus unlabeled target-domain
// samples. A dual ridge regressor on those features predicts embeddings.

struct DaklConfig {
  double gamma = 0.001;
  double ridge = 1.0;
  std::size_t num_centroids = 10000;
  std::size_t kmeans_iters = 100;
  std::uint64_t kmeans_seed = 0;

  void validate() const;
};

struct CentroidSet {
  Eigen::MatrixXd centers;   // r x d
  Eigen::MatrixXd targets;   // r x e, mean target of each cluster's members
  std::vector<std::size_t> assignment;  // training row -> centroid
  std::size_t iterations = 0;

  std::size_t size() const { return static_cast<std::size_t>(centers.rows()); }
};

// k-means++ seeding, then Lloyd iterations until the assignment stops
// changing or `max_iters` is reached. Clusters that empty out are re-seeded
// with the point farthest from its current centroid.
CentroidSet kmeans(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, std::size_t r,
                   std::size_t max_iters, std::uint64_t seed);

// Sum of squared distances from each point to its assigned centroid.
double distortion(const Eigen::MatrixXd& features, const CentroidSet& centroids);

// Linear kernel A B^T.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// K_ij / sqrt(row_self_i * col_self_j). Throws DataError naming the first
// non-positive self-similarity.
Eigen::MatrixXd normalize_kernel(const Eigen::MatrixXd& k, const Eigen::VectorXd& row_self,
                                 const Eigen::VectorXd& col_self);
// Square case: self-similarities read off the diagonal.
Eigen::MatrixXd normalize_kernel(const Eigen::MatrixXd& k);

// Elementwise exp(-gamma * (1 - K_hat)).
Eigen::MatrixXd rbf_transform(const Eigen::MatrixXd& k_hat, double gamma);

class DaklRegressor {
 public:
  // Fits dual ridge coefficients for the centroid rows of the reference set
  // formed by `centroids.centers` followed by `unlabeled` (may have 0 rows).
  static DaklRegressor fit(const CentroidSet& centroids, const Eigen::MatrixXd& unlabeled,
                           const DaklConfig& config);

  Eigen::MatrixXd predict(const Eigen::MatrixXd& queries) const;

  // Second-order feature rows of `queries` against the reference set.
  Eigen::MatrixXd second_order_features(const Eigen::MatrixXd& queries) const;

  const Eigen::MatrixXd& reference_set() const { return reference_; }
  const Eigen::VectorXd& diag_norms() const { return diag_norms_; }
  const Eigen::MatrixXd& dual_coefs() const { return dual_coefs_; }
  // K_DA rows of the centroids: the training design matrix.
  const Eigen::MatrixXd& centroid_features() const { return centroid_features_; }
  const DaklConfig& config() const { return config_; }
  std::size_t num_centroids() const { return centroid_count_; }

  // "PPDK", u32 version, u32 header length, JSON header, then Z, diag_norms
  // and alpha as (u32 rows, u32 cols, f64 column-major) blocks.
  void save(const std::filesystem::path& path) const;
  static DaklRegressor load(const std::filesystem::path& path);

 private:
  void rebuild_centroid_features();

  Eigen::MatrixXd reference_;  // (r + p) x d
  Eigen::VectorXd diag_norms_;  // K_ii for every reference row
  Eigen::MatrixXd dual_coefs_;  // r x e
  Eigen::MatrixXd centroid_features_;  // r x (r + p)
  DaklConfig config_;
  std::size_t centroid_count_ = 0;
};

enum class EnsembleMode { Median, WeightedAverage };

// Elementwise median (even count: mean of the two middle values) or
// normalized weighted mean of equally shaped matrices (no weights: uniform).
Eigen::MatrixXd combine_ensemble(const std::vector<Eigen::MatrixXd>& per_model,
                                 EnsembleMode mode, const std::vector<double>& weights = {});

}  // namespace promptprobe
