#include "serprobe/eval/metrics.hpp"

#include <limits>

namespace serprobe::eval {

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                 int num_classes) {
  if (preds.size() != labels.size()) {
    throw Error("confusion_matrix: " + std::to_string(preds.size()) + " predictions vs " +
                std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) throw Error("confusion_matrix: num_classes must be >= 1");
  ConfusionMatrix m = ConfusionMatrix::Zero(num_classes, num_classes);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const int y = labels[k], p = preds[k];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) {
      throw Error("confusion_matrix: class index out of range at sample " + std::to_string(k));
    }
    ++m(y, p);
  }
  return m;
}

RecallSummary recall_summary(const ConfusionMatrix& m) {
  RecallSummary s;
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const long long support = m.row(i).sum();
    if (support == 0) {
      s.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      s.excluded_classes.push_back(static_cast<int>(i));
      continue;
    }
    const double r = static_cast<double>(m(i, i)) / static_cast<double>(support);
    s.per_class.push_back(r);
    total += r;
    ++counted;
  }
  if (counted == 0) throw Error("unweighted_average_recall: confusion matrix has no samples");
  s.uar = total / counted;
  return s;
}

double unweighted_average_recall(const ConfusionMatrix& m) { return recall_summary(m).uar; }

std::vector<int> argmax_rows(const Eigen::MatrixXf& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace serprobe::eval
