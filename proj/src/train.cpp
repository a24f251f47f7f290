#include "dnl/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "dnl/errors.hpp"

namespace dnl {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.lr must be a finite non-negative number");
  }
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (repetitions == 0) throw ConfigError("train.repetitions must be at least 1");
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(ParameterStore& params, const Gradients& grads) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mit, m_new] = m_.try_emplace(name, p.shape());
    auto [vit, v_new] = v_.try_emplace(name, p.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<std::vector<std::size_t>> batch_schedule(std::size_t samples,
                                                     std::size_t batch_size,
                                                     std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < samples; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(samples, i + batch_size)));
  }
  return batches;
}

TrainResult train(Model& model, const PatchDataset& data, const TrainConfig& config,
                  std::uint64_t seed) {
  config.validate();
  const auto& samples = data.samples(Split::train);
  if (samples.empty()) throw ConfigError("training split is empty");
  if (data.classes() != model.config().classes) {
    throw ConfigError("dataset has " + std::to_string(data.classes()) + " classes, model " +
                      std::to_string(model.config().classes));
  }
  Adam adam(config.learning_rate);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = batch_schedule(samples.size(), config.batch_size, seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const Batch batch = data.make_batch(Split::train, batches[step]);
      Graph g;
      Binder bind(g, model.parameters());
      const Var logits = model.forward(bind, batch, Mode::train);
      const Var loss = ops::softmax_cross_entropy(logits, batch.labels);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                            std::to_string(step + 1));
      }
      g.backward(loss);
      adam.step(model.parameters(), g.parameter_gradients());
      loss_sum += value * static_cast<double>(batch.size());
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(samples.size()));
  }
  return result;
}

std::vector<int> predict_split(Model& model, const PatchDataset& data, Split split,
                               std::size_t batch_size) {
  const auto& samples = data.samples(split);
  std::vector<int> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - i);
    const Batch batch = data.make_batch(std::span(samples).subspan(i, n));
    const auto pred = model.predict(batch);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

RunMetrics evaluate(Model& model, const PatchDataset& data, Split split) {
  const auto& samples = data.samples(split);
  if (samples.empty()) throw ConfigError("evaluation split is empty");
  const auto pred = predict_split(model, data, split);
  ConfusionMatrix cm(data.classes());
  for (std::size_t i = 0; i < samples.size(); ++i) cm.add(samples[i].label - 1, pred[i]);
  return compute_metrics(cm);
}

double dataset_loss(Model& model, const PatchDataset& data, Split split,
                    std::size_t batch_size) {
  const auto& samples = data.samples(split);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - i);
    const Batch batch = data.make_batch(std::span(samples).subspan(i, n));
    Graph g;
    Binder bind(g, model.parameters());
    const Var loss =
        ops::softmax_cross_entropy(model.forward(bind, batch, Mode::eval), batch.labels);
    total += loss.value()[0] * static_cast<double>(n);
  }
  return total / static_cast<double>(samples.size());
}

MetricsReport run_repeated(const ModelConfig& model_config, const PatchDataset& data,
                           const TrainConfig& config,
                           const std::vector<std::string>& class_names) {
  config.validate();
  std::vector<RunMetrics> runs;
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t seed = config.seed + rep;
    Model model(model_config, seed);
    train(model, data, config, seed);
    runs.push_back(evaluate(model, data, Split::test));
  }
  return aggregate(runs, class_names);
}

std::vector<WiringConfig> default_ablation_wirings() {
  std::vector<WiringConfig> out;
  for (const char* w : {"F H H H", "F H L L", "F L L L", "H H L H", "L H L H", "L L L L",
                        "H H H H", "F H L H"}) {
    out.push_back(WiringConfig::parse(w));
  }
  return out;
}

std::vector<AblationRow> ablate(const ModelConfig& model_config, const PatchDataset& data,
                                const std::vector<WiringConfig>& wirings,
                                const TrainConfig& config) {
  if (wirings.empty()) throw ConfigError("ablation needs at least one wiring");
  std::vector<AblationRow> rows;
  for (const WiringConfig& w : wirings) {
    AblationRow row{w, {}, {}};
    ModelConfig mc = model_config;
    mc.attention.wiring = w;
    try {
      row.oa = run_repeated(mc, data, config).oa;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Comparison compare_nl_dnl(const ModelConfig& model_config, const PatchDataset& data,
                          const TrainConfig& config,
                          const std::vector<std::string>& class_names) {
  ModelConfig nl = model_config, dnl = model_config;
  nl.attention.type = AttentionType::nl;
  dnl.attention.type = AttentionType::dnl;
  return {run_repeated(nl, data, config, class_names),
          run_repeated(dnl, data, config, class_names)};
}

namespace {

std::string num(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "No.  W_v  W_k  W_q  W_m  OA (%)\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    char line[160];
    std::snprintf(line, sizeof line, "%-4zu %-4c %-4c %-4c %-4c ", i + 1,
                  source_token(r.wiring.value), source_token(r.wiring.key),
                  source_token(r.wiring.query), source_token(r.wiring.unary));
    os << line;
    if (r.error.empty()) {
      os << num(r.oa.mean, 2) << " +- " << num(r.oa.std, 2) << '\n';
    } else {
      os << "failed: " << r.error << '\n';
    }
  }
  return os.str();
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "row,value,key,query,unary,oa_mean,oa_std,status\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i + 1 << ',' << source_token(r.wiring.value) << ',' << source_token(r.wiring.key) << ','
       << source_token(r.wiring.query) << ',' << source_token(r.wiring.unary) << ',';
    if (r.error.empty()) {
      os << num(r.oa.mean, 6) << ',' << num(r.oa.std, 6) << ",ok\n";
    } else {
      std::string msg = r.error;
      for (char& c : msg) {
        if (c == ',' || c == '\n') c = ' ';
      }
      os << ",," << "error: " << msg << '\n';
    }
  }
  return os.str();
}

std::string format_comparison_table(const Comparison& c) {
  std::ostringstream os;
  os << "Attention  OA (%)           AA (%)           Kappa\n";
  for (auto [name, r] : {std::pair{"NL", &c.nl}, std::pair{"DNL", &c.dnl}}) {
    char line[200];
    std::snprintf(line, sizeof line, "%-10s %6s +- %-6s  %6s +- %-6s  %6s +- %-6s\n", name,
                  num(r->oa.mean, 2).c_str(), num(r->oa.std, 2).c_str(),
                  num(r->aa.mean, 2).c_str(), num(r->aa.std, 2).c_str(),
                  num(r->kappa.mean, 4).c_str(), num(r->kappa.std, 4).c_str());
    os << line;
  }
  return os.str();
}

std::string format_comparison_csv(const Comparison& c) {
  std::ostringstream os;
  os << "attention,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std\n";
  for (auto [name, r] : {std::pair{"nl", &c.nl}, std::pair{"dnl", &c.dnl}}) {
    os << name << ',' << num(r->oa.mean, 6) << ',' << num(r->oa.std, 6) << ','
       << num(r->aa.mean, 6) << ',' << num(r->aa.std, 6) << ',' << num(r->kappa.mean, 6) << ','
       << num(r->kappa.std, 6) << '\n';
  }
  return os.str();
}

}  // namespace dnl
