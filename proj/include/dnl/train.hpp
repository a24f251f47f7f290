#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnl/dataset.hpp"
#include "dnl/metrics.hpp"
#include "dnl/model.hpp"

namespace dnl {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t repetitions = 5;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, epsilon 1e-8).
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void step(ParameterStore& params, const Gradients& grads);
  std::size_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

/// Shuffled mini-batches of training indices for one epoch. Depends only on
/// (dataset size, batch size, seed, epoch), so paired runs see the same
/// batches. The last batch may be short.
std::vector<std::vector<std::size_t>> batch_schedule(std::size_t samples,
                                                     std::size_t batch_size,
                                                     std::uint64_t seed, std::size_t epoch);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training loss of each epoch
};

/// Mini-batch softmax cross-entropy training. Throws TrainingError on the
/// first non-finite loss, naming the epoch and step.
TrainResult train(Model& model, const PatchDataset& data, const TrainConfig& config,
                  std::uint64_t seed);

/// Eval-mode predictions (0-based) for every sample of a split.
std::vector<int> predict_split(Model& model, const PatchDataset& data, Split split,
                               std::size_t batch_size = 64);
RunMetrics evaluate(Model& model, const PatchDataset& data, Split split = Split::test);

/// Mean eval-mode loss over a split.
double dataset_loss(Model& model, const PatchDataset& data, Split split,
                    std::size_t batch_size = 64);

/// Trains and evaluates config.repetitions models with seeds seed, seed+1, ...
MetricsReport run_repeated(const ModelConfig& model, const PatchDataset& data,
                           const TrainConfig& config,
                           const std::vector<std::string>& class_names = {});

struct AblationRow {
  WiringConfig wiring;
  Stat oa;
  std::string error;  // non-empty when this row's training failed
};

/// The eight distinct wirings of the original wiring study, in table order.
std::vector<WiringConfig> default_ablation_wirings();

/// One run_repeated() per wiring; a failing row records its error and the
/// grid continues.
std::vector<AblationRow> ablate(const ModelConfig& model, const PatchDataset& data,
                                const std::vector<WiringConfig>& wirings,
                                const TrainConfig& config);

struct Comparison {
  MetricsReport nl;
  MetricsReport dnl;
};

/// NL and DNL with otherwise identical configuration and seeds.
Comparison compare_nl_dnl(const ModelConfig& model, const PatchDataset& data,
                          const TrainConfig& config,
                          const std::vector<std::string>& class_names = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows);
/// Header `row,value,key,query,unary,oa_mean,oa_std,status`.
std::string format_ablation_csv(const std::vector<AblationRow>& rows);
std::string format_comparison_table(const Comparison& c);
/// Header `attention,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std`.
std::string format_comparison_csv(const Comparison& c);

}  // namespace dnl
