#include "dnl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dnl/errors.hpp"

namespace dnl {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= classes_ ||
      static_cast<std::size_t>(predicted) >= classes_) {
    throw ShapeError("confusion entry (" + std::to_string(truth) + ", " +
                     std::to_string(predicted) + ") outside " + std::to_string(classes_) +
                     " classes");
  }
  counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)] += count;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::int64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, predicted);
  return s;
}

ConfusionMatrix ConfusionMatrix::transposed() const {
  ConfusionMatrix t(classes_);
  for (std::size_t i = 0; i < classes_; ++i)
    for (std::size_t j = 0; j < classes_; ++j) t.counts_[j * classes_ + i] = at(i, j);
  return t;
}

RunMetrics compute_metrics(const ConfusionMatrix& confusion) {
  const std::size_t K = confusion.classes();
  const std::int64_t total = confusion.total();
  if (total == 0) throw ConfigError("cannot score an empty confusion matrix");
  RunMetrics m;
  m.confusion = confusion;
  m.per_class.assign(K, std::numeric_limits<double>::quiet_NaN());
  m.present.assign(K, false);

  std::int64_t trace = 0;
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < K; ++k) {
    trace += confusion.at(k, k);
    const std::int64_t row = confusion.row_sum(k);
    if (row == 0) {
      m.missing_classes = true;
      continue;
    }
    m.present[k] = true;
    m.per_class[k] = 100.0 * static_cast<double>(confusion.at(k, k)) / static_cast<double>(row);
    recall_sum += m.per_class[k];
    ++present;
  }
  // Kappa = (n * trace - sum r_k c_k) / (n^2 - sum r_k c_k), from integer counts.
  const long double n = static_cast<long double>(total);
  long double chance = 0.0L;
  for (std::size_t k = 0; k < K; ++k) {
    chance += static_cast<long double>(confusion.row_sum(k)) *
              static_cast<long double>(confusion.col_sum(k));
  }
  m.oa = 100.0 * static_cast<double>(trace) / static_cast<double>(total);
  m.aa = recall_sum / static_cast<double>(present);
  const long double denom = n * n - chance;
  if (denom == 0.0L) {
    m.kappa = trace == total ? 1.0 : 0.0;
  } else {
    m.kappa = static_cast<double>((n * static_cast<long double>(trace) - chance) / denom);
  }
  return m;
}

Stat mean_std(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

MetricsReport aggregate(const std::vector<RunMetrics>& runs,
                        std::vector<std::string> class_names) {
  if (runs.empty()) throw ConfigError("no runs to aggregate");
  const std::size_t K = runs.front().confusion.classes();
  MetricsReport r;
  r.repetitions = runs.size();
  r.confusion = runs.front().confusion;
  if (class_names.size() != K) {
    class_names.clear();
    for (std::size_t k = 0; k < K; ++k) class_names.push_back("class " + std::to_string(k + 1));
  }
  r.class_names = std::move(class_names);
  for (std::size_t k = 0; k < K; ++k) r.test_counts.push_back(static_cast<std::size_t>(r.confusion.row_sum(k)));

  std::vector<double> oa, aa, kappa;
  for (const auto& run : runs) {
    oa.push_back(run.oa);
    aa.push_back(run.aa);
    kappa.push_back(run.kappa);
    r.missing_classes = r.missing_classes || run.missing_classes;
  }
  r.oa = mean_std(oa);
  r.aa = mean_std(aa);
  r.kappa = mean_std(kappa);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> v;
    for (const auto& run : runs) {
      if (run.present[k]) v.push_back(run.per_class[k]);
    }
    r.per_class.push_back(v.empty() ? Stat{std::numeric_limits<double>::quiet_NaN(), 0.0}
                                    : mean_std(v));
  }
  return r;
}

namespace {

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_metrics_table(const MetricsReport& report) {
  std::size_t name_width = 5;
  for (const auto& n : report.class_names) name_width = std::max(name_width, n.size());
  char line[256];
  std::ostringstream os;
  std::snprintf(line, sizeof line, "%-4s %-*s %6s  %s\n", "No.", static_cast<int>(name_width),
                "Class", "Test", "Accuracy (%)");
  os << line;
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const Stat& s = report.per_class[k];
    std::snprintf(line, sizeof line, "%-4zu %-*s %6zu  %s +- %s\n", k + 1,
                  static_cast<int>(name_width), report.class_names[k].c_str(),
                  report.test_counts[k], fixed(s.mean, 2).c_str(), fixed(s.std, 2).c_str());
    os << line;
  }
  auto summary = [&](const char* name, const Stat& s, int decimals) {
    std::snprintf(line, sizeof line, "%-4s %-*s %6s  %s +- %s\n", "", static_cast<int>(name_width),
                  name, "", fixed(s.mean, decimals).c_str(), fixed(s.std, decimals).c_str());
    os << line;
  };
  summary("OA", report.oa, 2);
  summary("AA", report.aa, 2);
  summary("Kappa", report.kappa, 4);
  os << "repetitions: " << report.repetitions << '\n';
  if (report.missing_classes) os << "note: some classes are absent from the test split; AA covers present classes only\n";
  return os.str();
}

std::string format_metrics_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "metric,class_id,name,test_count,mean,std\n";
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    os << "class," << k + 1 << ',' << csv_field(report.class_names[k]) << ','
       << report.test_counts[k] << ',' << fixed(report.per_class[k].mean, 6) << ','
       << fixed(report.per_class[k].std, 6) << '\n';
  }
  std::size_t total = 0;
  for (auto c : report.test_counts) total += c;
  os << "oa,,OA," << total << ',' << fixed(report.oa.mean, 6) << ',' << fixed(report.oa.std, 6) << '\n';
  os << "aa,,AA," << total << ',' << fixed(report.aa.mean, 6) << ',' << fixed(report.aa.std, 6) << '\n';
  os << "kappa,,Kappa," << total << ',' << fixed(report.kappa.mean, 6) << ','
     << fixed(report.kappa.std, 6) << '\n';
  return os.str();
}

std::string format_confusion_csv(const ConfusionMatrix& confusion) {
  std::ostringstream os;
  os << "truth\\predicted";
  for (std::size_t j = 0; j < confusion.classes(); ++j) os << ',' << j + 1;
  os << '\n';
  for (std::size_t i = 0; i < confusion.classes(); ++i) {
    os << i + 1;
    for (std::size_t j = 0; j < confusion.classes(); ++j) os << ',' << confusion.at(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace dnl
