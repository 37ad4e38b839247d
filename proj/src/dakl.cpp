#include "promptprobe/dakl.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/parallel.hpp"

namespace promptprobe {

namespace {

constexpr std::string_view kRegressorMagic = "PPDK";
constexpr std::uint32_t kRegressorVersion = 1;

using Index = Eigen::Index;

double squared_distance(const Eigen::MatrixXd& a, Index i, const Eigen::MatrixXd& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Nearest center per point; ties go to the lower center index.
std::vector<std::size_t> assign_points(const Eigen::MatrixXd& features,
                                       const Eigen::MatrixXd& centers) {
  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<std::size_t> assignment(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (Index c = 0; c < centers.rows(); ++c) {
        const double dist = squared_distance(features, static_cast<Index>(i), centers, c);
        if (dist < best) {
          best = dist;
          best_c = static_cast<std::size_t>(c);
        }
      }
      assignment[i] = best_c;
    }
  });
  return assignment;
}

Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& values, const std::vector<std::size_t>& assignment,
                              std::size_t r, std::vector<std::size_t>& counts) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Index>(r), values.cols());
  counts.assign(r, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    sums.row(static_cast<Index>(assignment[i])) += values.row(static_cast<Index>(i));
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < r; ++c) {
    if (counts[c] > 0) sums.row(static_cast<Index>(c)) /= static_cast<double>(counts[c]);
  }
  return sums;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& features, std::size_t r, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(features.rows());
  Eigen::MatrixXd centers(static_cast<Index>(r), features.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto pick = [&](std::size_t c, std::size_t i) {
    chosen[i] = true;
    centers.row(static_cast<Index>(c)) = features.row(static_cast<Index>(i));
    for (std::size_t k = 0; k < n; ++k) {
      min_dist[k] = std::min(min_dist[k], squared_distance(features, static_cast<Index>(k), centers,
                                                           static_cast<Index>(c)));
    }
  };

  pick(0, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)) % n);
  for (std::size_t c = 1; c < r; ++c) {
    double total = 0.0;
    for (double dist : min_dist) total += dist;
    std::size_t next = n;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double running = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        running += min_dist[k];
        if (min_dist[k] > 0.0 && running >= target) {
          next = k;
          break;
        }
      }
      if (next == n) {
        // Rounding left the target just past the last positive weight.
        for (std::size_t k = n; k-- > 0;) {
          if (min_dist[k] > 0.0) {
            next = k;
            break;
          }
        }
      }
    } else {
      // Remaining points all coincide with a center; take the first unused one.
      for (std::size_t k = 0; k < n; ++k) {
        if (!chosen[k]) {
          next = k;
          break;
        }
      }
    }
    pick(c, next);
  }
  return centers;
}

void check_positive_self(const Eigen::VectorXd& self, const char* what) {
  for (Index i = 0; i < self.size(); ++i) {
    if (!(self[i] > 0.0)) {
      throw DataError(std::string(what) + " row " + std::to_string(i) +
                      " has non-positive self-similarity (zero-norm vector)");
    }
  }
}

void write_block(detail::BinaryWriter& out, const Eigen::MatrixXd& m) {
  out.u32(static_cast<std::uint32_t>(m.rows()));
  out.u32(static_cast<std::uint32_t>(m.cols()));
  for (Index k = 0; k < m.size(); ++k) out.f64(m.data()[k]);
}

Eigen::MatrixXd read_block(detail::BinaryReader& in) {
  const auto rows = in.u32();
  const auto cols = in.u32();
  Eigen::MatrixXd m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = in.f64();
  return m;
}

}  // namespace

void DaklConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  if (!(ridge > 0.0) || !std::isfinite(ridge)) throw InvalidArgument("ridge must be > 0");
  if (num_centroids == 0) throw InvalidArgument("number of centroids must be at least 1");
}

CentroidSet kmeans(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, std::size_t r,
                   std::size_t max_iters, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (r == 0) throw InvalidArgument("k-means needs at least one centroid");
  if (r > n) {
    throw InvalidArgument("k-means asked for " + std::to_string(r) + " centroids from only " +
                          std::to_string(n) + " samples");
  }
  if (targets.rows() != features.rows()) throw ShapeError("k-means features and targets are not row-aligned");

  std::mt19937_64 rng(seed);
  CentroidSet out;
  out.centers = kmeanspp_init(features, r, rng);
  std::vector<std::size_t> counts;

  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    auto assignment = assign_points(features, out.centers);
    const bool changed = iter == 0 || assignment != out.assignment;
    out.assignment = std::move(assignment);
    out.iterations = iter + 1;
    if (!changed) break;

    out.centers = cluster_means(features, out.assignment, r, counts);
    for (std::size_t c = 0; c < r; ++c) {
      if (counts[c] > 0) continue;
      // Steal the point farthest from its centroid among clusters that can
      // spare one.
      double worst = -1.0;
      std::size_t worst_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[out.assignment[i]] < 2) continue;
        const double dist = squared_distance(features, static_cast<Index>(i), out.centers,
                                             static_cast<Index>(out.assignment[i]));
        if (dist > worst) {
          worst = dist;
          worst_i = i;
        }
      }
      const std::size_t donor = out.assignment[worst_i];
      out.assignment[worst_i] = c;
      --counts[donor];
      counts[c] = 1;
      out.centers = cluster_means(features, out.assignment, r, counts);
    }
  }
  out.targets = cluster_means(targets, out.assignment, r, counts);
  return out;
}

double distortion(const Eigen::MatrixXd& features, const CentroidSet& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < centroids.assignment.size(); ++i) {
    total += squared_distance(features, static_cast<Index>(i), centroids.centers,
                              static_cast<Index>(centroids.assignment[i]));
  }
  return total;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("kernel inputs have dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.cols()));
  }
  return a * b.transpose();
}

Eigen::MatrixXd normalize_kernel(const Eigen::MatrixXd& k, const Eigen::VectorXd& row_self,
                                 const Eigen::VectorXd& col_self) {
  if (row_self.size() != k.rows() || col_self.size() != k.cols()) {
    throw ShapeError("self-similarity vectors do not match the kernel block");
  }
  check_positive_self(row_self, "kernel");
  check_positive_self(col_self, "reference");
  Eigen::MatrixXd out(k.rows(), k.cols());
  for (Index j = 0; j < k.cols(); ++j) {
    for (Index i = 0; i < k.rows(); ++i) {
      out(i, j) = k(i, j) / std::sqrt(row_self[i] * col_self[j]);
    }
  }
  return out;
}

Eigen::MatrixXd normalize_kernel(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw ShapeError("square kernel expected");
  const Eigen::VectorXd self = k.diagonal();
  return normalize_kernel(k, self, self);
}

Eigen::MatrixXd rbf_transform(const Eigen::MatrixXd& k_hat, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  return k_hat.unaryExpr([gamma](double v) { return std::exp(-gamma * (1.0 - v)); });
}

DaklRegressor DaklRegressor::fit(const CentroidSet& centroids, const Eigen::MatrixXd& unlabeled,
                                 const DaklConfig& config) {
  config.validate();
  const Index r = centroids.centers.rows();
  if (r == 0) throw InvalidArgument("DAKL needs at least one centroid");
  if (centroids.targets.rows() != r) throw ShapeError("centroid targets are not row-aligned");
  if (unlabeled.rows() > 0 && unlabeled.cols() != centroids.centers.cols()) {
    throw ShapeError("target-domain pool has dimension " + std::to_string(unlabeled.cols()) +
                     ", training features have " + std::to_string(centroids.centers.cols()));
  }

  DaklRegressor reg;
  reg.config_ = config;
  reg.reference_.resize(r + unlabeled.rows(), centroids.centers.cols());
  reg.reference_.topRows(r) = centroids.centers;
  if (unlabeled.rows() > 0) reg.reference_.bottomRows(unlabeled.rows()) = unlabeled;

  reg.centroid_count_ = static_cast<std::size_t>(r);
  reg.diag_norms_ = reg.reference_.rowwise().squaredNorm();
  check_positive_self(reg.diag_norms_, "reference");
  reg.rebuild_centroid_features();

  const Eigen::MatrixXd& phi = reg.centroid_features_;
  Eigen::MatrixXd system = phi * phi.transpose();
  system.diagonal().array() += config.ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericError("ridge system is not positive definite");
  }
  reg.dual_coefs_ = llt.solve(centroids.targets);
  if (!reg.dual_coefs_.allFinite()) throw NumericError("ridge solve produced non-finite coefficients");
  return reg;
}

void DaklRegressor::rebuild_centroid_features() {
  // The centroids are the leading rows of the reference set.
  centroid_features_ = second_order_features(reference_.topRows(static_cast<Index>(centroid_count_)));
}

Eigen::MatrixXd DaklRegressor::second_order_features(const Eigen::MatrixXd& queries) const {
  if (queries.cols() != reference_.cols()) {
    throw ShapeError("query dimension " + std::to_string(queries.cols()) +
                     " does not match reference dimension " + std::to_string(reference_.cols()));
  }
  const Eigen::MatrixXd k = kernel_matrix(queries, reference_);
  const Eigen::VectorXd self = queries.rowwise().squaredNorm();
  return rbf_transform(normalize_kernel(k, self, diag_norms_), config_.gamma);
}

Eigen::MatrixXd DaklRegressor::predict(const Eigen::MatrixXd& queries) const {
  const Eigen::MatrixXd gram = second_order_features(queries) * centroid_features_.transpose();
  return gram * dual_coefs_;
}

void DaklRegressor::save(const std::filesystem::path& path) const {
  const nlohmann::json header = {
      {"gamma", config_.gamma},
      {"ridge", config_.ridge},
      {"num_centroids", centroid_count_},
      {"kmeans_iters", config_.kmeans_iters},
      {"kmeans_seed", config_.kmeans_seed},
      {"reference_rows", reference_.rows()},
      {"feature_dim", reference_.cols()},
      {"embed_dim", dual_coefs_.cols()},
  };
  const std::string text = header.dump();
  detail::BinaryWriter out(path);
  out.bytes(kRegressorMagic);
  out.u32(kRegressorVersion);
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.bytes(text);
  write_block(out, reference_);
  write_block(out, diag_norms_);
  write_block(out, dual_coefs_);
  out.finish();
}

DaklRegressor DaklRegressor::load(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  if (in.bytes(kRegressorMagic.size()) != kRegressorMagic) {
    throw FormatError("'" + path.string() + "' is not a DAKL checkpoint");
  }
  if (const auto version = in.u32(); version != kRegressorVersion) {
    throw FormatError("'" + path.string() + "' has unsupported DAKL checkpoint version " +
                      std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.bytes(in.u32()));
  } catch (const nlohmann::json::exception& err) {
    throw FormatError("'" + path.string() + "' has a malformed header: " + err.what());
  }

  DaklRegressor reg;
  try {
    reg.config_.gamma = header.at("gamma").get<double>();
    reg.config_.ridge = header.at("ridge").get<double>();
    reg.config_.num_centroids = header.at("num_centroids").get<std::size_t>();
    reg.config_.kmeans_iters = header.at("kmeans_iters").get<std::size_t>();
    reg.config_.kmeans_seed = header.at("kmeans_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& err) {
    throw FormatError("'" + path.string() + "' header is missing fields: " + err.what());
  }
  reg.centroid_count_ = reg.config_.num_centroids;
  reg.reference_ = read_block(in);
  reg.diag_norms_ = read_block(in);
  reg.dual_coefs_ = read_block(in);
  if (!in.at_end()) throw FormatError("'" + path.string() + "' has trailing bytes");

  const auto rows = reg.reference_.rows();
  if (reg.diag_norms_.size() != rows || reg.dual_coefs_.rows() != static_cast<Index>(reg.centroid_count_) ||
      static_cast<Index>(reg.centroid_count_) > rows) {
    throw FormatError("'" + path.string() + "' blocks have inconsistent shapes");
  }
  check_positive_self(reg.diag_norms_, "reference");
  reg.rebuild_centroid_features();
  return reg;
}

Eigen::MatrixXd combine_ensemble(const std::vector<Eigen::MatrixXd>& per_model, EnsembleMode mode,
                                 const std::vector<double>& weights) {
  if (per_model.empty()) throw InvalidArgument("ensemble needs at least one matrix");
  const Index rows = per_model.front().rows();
  const Index cols = per_model.front().cols();
  for (const auto& m : per_model) {
    if (m.rows() != rows || m.cols() != cols) throw ShapeError("ensemble members differ in shape");
  }

  if (mode == EnsembleMode::WeightedAverage) {
    if (weights.empty()) return combine_ensemble(per_model, mode, std::vector<double>(per_model.size(), 1.0));
    if (weights.size() != per_model.size()) {
      throw InvalidArgument("ensemble has " + std::to_string(per_model.size()) + " members but " +
                            std::to_string(weights.size()) + " weights");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("ensemble weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("ensemble weights must not all be zero");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t k = 0; k < per_model.size(); ++k) {
      if (weights[k] != 0.0) out += (weights[k] / total) * per_model[k];
    }
    return out;
  }

  Eigen::MatrixXd out(rows, cols);
  std::vector<double> cell(per_model.size());
  const std::size_t mid = cell.size() / 2;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < per_model.size(); ++k) cell[k] = per_model[k](i, j);
      std::sort(cell.begin(), cell.end());
      out(i, j) = cell.size() % 2 == 1 ? cell[mid] : 0.5 * (cell[mid - 1] + cell[mid]);
    }
  }
  return out;
}

}  // namespace promptprobe
