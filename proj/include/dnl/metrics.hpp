#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dnl {

/// counts[truth * classes + predicted], 0-based class indices.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 2);

  void add(int truth, int predicted, std::int64_t count = 1);
  std::int64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  std::size_t classes() const { return classes_; }
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t truth) const;
  std::int64_t col_sum(std::size_t predicted) const;
  /// Swaps the truth and prediction roles.
  ConfusionMatrix transposed() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::int64_t> counts_;
};

/// Scores of one evaluated run. Accuracies are percentages.
struct RunMetrics {
  std::vector<double> per_class;       // recall per class; NaN when absent from the split
  std::vector<bool> present;
  double oa = 0.0;
  double aa = 0.0;                     // mean recall over present classes
  double kappa = 0.0;
  bool missing_classes = false;
  ConfusionMatrix confusion;
};

/// OA = trace / total, AA = mean per-class recall over classes present in the
/// truth, Kappa = (p_o - p_e) / (1 - p_e) with p_e from the marginals. When
/// p_e == 1 Kappa is 1 for perfect agreement and 0 otherwise.
RunMetrics compute_metrics(const ConfusionMatrix& confusion);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

Stat mean_std(const std::vector<double>& values);

/// Mean +- std over repetitions. `confusion` is that of the first run; every
/// repetition evaluates the same test split, so its row sums are the
/// per-class test counts.
struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<Stat> per_class;
  std::vector<std::size_t> test_counts;
  Stat oa;
  Stat aa;
  Stat kappa;
  bool missing_classes = false;
  std::size_t repetitions = 0;
  ConfusionMatrix confusion;
};

MetricsReport aggregate(const std::vector<RunMetrics>& runs,
                        std::vector<std::string> class_names);

/// Aligned plain-text table: one row per class, then OA, AA, Kappa.
std::string format_metrics_table(const MetricsReport& report);
/// Header `metric,class_id,name,test_count,mean,std`; rows are `class`
/// entries followed by `oa`, `aa` and `kappa`. Values use 6 decimals.
std::string format_metrics_csv(const MetricsReport& report);
/// Header `truth\predicted,1,2,...`; one row per true class id.
std::string format_confusion_csv(const ConfusionMatrix& confusion);

}  // namespace dnl
