#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "serprobe/types.hpp"

namespace serprobe::eval {

using ConfusionMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

// M(i, j) = number of samples with label i predicted as j.
ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                 int num_classes);

struct RecallSummary {
  double uar = 0.0;                   // mean recall over classes with >= 1 true instance
  std::vector<double> per_class;      // NaN for excluded classes
  std::vector<int> excluded_classes;  // rows with zero support
};

// Unweighted average recall. Classes with no true instances are excluded and
// listed; throws if every row is empty.
RecallSummary recall_summary(const ConfusionMatrix& m);
double unweighted_average_recall(const ConfusionMatrix& m);

// argmax over each row of a B x C probability matrix, lowest index on ties.
std::vector<int> argmax_rows(const Eigen::MatrixXf& probs);

}  // namespace serprobe::eval
