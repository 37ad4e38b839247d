#include "promptprobe/evalkit.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "promptprobe/error.hpp"

namespace promptprobe {

EvalReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("prediction is " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + " but target is " +
                     std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  }
  EvalReport report;
  report.n = static_cast<std::size_t>(pred.rows());
  report.per_sample.resize(report.n);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const double np = pred.row(i).norm();
    const double nt = target.row(i).norm();
    if (np == 0.0) throw NumericError("prediction row " + std::to_string(i) + " has zero norm");
    if (nt == 0.0) throw NumericError("target row " + std::to_string(i) + " has zero norm");
    const double c = pred.row(i).dot(target.row(i)) / (np * nt);
    report.per_sample[static_cast<std::size_t>(i)] = std::clamp(c, -1.0, 1.0);
  }
  if (report.n > 0) {
    report.mean_cosine = std::accumulate(report.per_sample.begin(), report.per_sample.end(), 0.0) /
                         static_cast<double>(report.n);
  }
  return report;
}

std::string CaptionResult::caption() const {
  std::string out = retrieved_prompt;
  for (const auto& w : appended_words) {
    out += ", ";
    out += w;
  }
  return out;
}

Neighbor nearest_neighbor(const Eigen::Ref<const Eigen::VectorXd>& query, const Eigen::MatrixXd& db) {
  if (db.rows() == 0) throw InvalidArgument("nearest-neighbor search over an empty database");
  if (db.cols() != query.size()) {
    throw ShapeError("query has dimension " + std::to_string(query.size()) + ", database has " +
                     std::to_string(db.cols()));
  }
  const double nq = query.norm();
  if (nq == 0.0) throw NumericError("query embedding has zero norm");

  Neighbor best{0, -std::numeric_limits<double>::infinity()};
  for (Eigen::Index i = 0; i < db.rows(); ++i) {
    const double nd = db.row(i).norm();
    // A zero database row has no direction; it never beats a real match.
    const double sim = nd == 0.0 ? -2.0 : db.row(i).dot(query) / (nd * nq);
    if (sim > best.similarity) best = {static_cast<std::size_t>(i), sim};
  }
  return best;
}

std::vector<std::size_t> top_words(const Eigen::Ref<const Eigen::VectorXd>& probs, std::size_t k) {
  std::vector<std::size_t> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probs[static_cast<Eigen::Index>(a)] > probs[static_cast<Eigen::Index>(b)];
  });
  order.resize(k);
  return order;
}

CaptionResult caption(const Eigen::Ref<const Eigen::VectorXd>& query_embedding,
                      const Eigen::Ref<const Eigen::VectorXd>& probs, const Eigen::MatrixXd& db,
                      const std::vector<PromptRecord>& prompts, const Vocabulary& vocab) {
  if (db.rows() == 0) throw InvalidArgument("caption database is empty");
  if (static_cast<std::size_t>(db.rows()) != prompts.size()) {
    throw ShapeError("caption database has " + std::to_string(db.rows()) + " rows but " +
                     std::to_string(prompts.size()) + " prompts");
  }
  if (static_cast<std::size_t>(probs.size()) != vocab.size()) {
    throw ShapeError("probability vector does not match the vocabulary size");
  }
  const auto nn = nearest_neighbor(query_embedding, db);
  CaptionResult result;
  result.neighbor_row = nn.row;
  result.neighbor_similarity = nn.similarity;
  result.retrieved_id = prompts[nn.row].id;
  result.retrieved_prompt = prompts[nn.row].text;
  for (auto j : top_words(probs, kCaptionWords)) result.appended_words.push_back(vocab.token(j));
  return result;
}

}  // namespace promptprobe
