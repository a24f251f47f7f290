// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "dnl/attention.hpp"
#include "dnl/checkpoint.hpp"
#include "dnl/config.hpp"
#include "dnl/experiment.hpp"
#include "dnl/gradcheck.hpp"
#include "dnl/metrics.hpp"
#include "dnl/model.hpp"
#include "dnl/raster.hpp"
#include "dnl/render.hpp"
#include "dnl/scene.hpp"
#include "dnl/train.hpp"

using namespace dnl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failed check; later checks still run.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok && failure_.empty()) failure_ = what;
    if (!ok) ++failed_;
  }
  Outcome outcome(const std::string& summary) const {
    if (failed_ == 0) return {true, summary};
    return {false, std::to_string(failed_) + "/" + std::to_string(total_) +
                       " checks failed, first: " + failure_};
  }

 private:
  std::size_t total_ = 0, failed_ = 0;
  std::string failure_;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dnl_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suite();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Checks c;
  double worst = 0.0;
  bool model_checked = false;
  for (const auto& r : results) {
    c.expect(r.passed && r.max_relative_error < 1e-4,
             r.name + " rel err " + fmt("%.3g", r.max_relative_error));
    worst = std::max(worst, r.max_relative_error);
    model_checked |= r.name.rfind("model/", 0) == 0;
  }
  c.expect(model_checked, "full model not covered");
  c.expect(seconds < 120.0, "runtime " + fmt("%.1f s", seconds));
  return c.outcome(std::to_string(results.size()) + " checks, worst rel err " +
                   fmt("%.2e", worst) + " < 1e-4, " + fmt("%.1f s", seconds) + " < 120 s");
}

// ---------------------------------------------------------------- 2

struct AttnInputs {
  ParameterStore store;
  Tensor h, l, f;
};

AttnInputs attn_inputs(std::uint64_t seed) {
  AttnInputs s;
  std::mt19937_64 rng(seed);
  attention::init_params(s.store, 8, 4, rng);
  s.store.at("attn.value.b") = Tensor::randn({8}, rng);
  for (Tensor* t : {&s.h, &s.l, &s.f}) *t = Tensor::randn({2, 8, 3, 3}, rng);
  return s;
}

Tensor attn_forward(AttnInputs& s, AttentionType type) {
  Graph g;
  Binder bind(g, s.store);
  const FeatureMaps maps{g.constant(s.h), g.constant(s.l), g.constant(s.f)};
  return attention::forward(bind, maps, {type, 4, WiringConfig::parse("F H L H")}).value();
}

Tensor permute_pixels(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t planes = x.dim(0) * x.dim(1), M = perm.size();
  Tensor out(x.shape());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t m = 0; m < M; ++m) out[p * M + m] = x[p * M + perm[m]];
  return out;
}

Outcome attention_identities() {
  Checks c;
  std::mt19937_64 rng(2);
  double worst_sum = 0.0, worst_split = 0.0, worst_mean = 0.0, worst_perm = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t M = 4 + trial % 9, N = 3 + trial % 7, D = 2 + trial % 5;
    const Tensor q = Tensor::randn({M, D}, rng, 2.0), k = Tensor::randn({N, D}, rng, 2.0);
    const Tensor u = Tensor::randn({N}, rng, 2.0);

    const AttentionWeights w = attention::dnl_weights(q, k, u);
    const Tensor coupled = attention::softmax_over_keys(attention::coupled_logits(q, k));
    for (std::size_t m = 0; m < M; ++m) {
      double pair = 0.0, plain = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        pair += w.pairwise[m * N + n];
        plain += coupled[m * N + n];
      }
      worst_sum = std::max({worst_sum, std::abs(pair - 1.0), std::abs(plain - 1.0)});
    }
    worst_sum = std::max(worst_sum, std::abs(w.unary.sum() - 1.0));

    // Oracle: key-dependent terms only, built entry by entry.
    std::vector<double> uq(D, 0.0), uk(D, 0.0);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t d = 0; d < D; ++d) uq[d] += q[m * D + d] / double(M);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d) uk[d] += k[n * D + d] / double(N);
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> row(N);
      for (std::size_t n = 0; n < N; ++n) {
        double unary = 0.0, pair = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
          unary += uq[d] * k[n * D + d];
          pair += (q[m * D + d] - uq[d]) * (k[n * D + d] - uk[d]);
        }
        row[n] = unary + pair;
      }
      for (std::size_t n = 0; n < N; ++n) {
        worst_split = std::max(
            worst_split, std::abs(coupled[m * N + n] - oracle::rowwise_softmax_entry(row, n)));
      }
    }
    const Tensor rebuilt =
        attention::softmax_over_keys(attention::reconstructed_coupled_logits(q, k));
    worst_split = std::max(worst_split, max_abs_diff(coupled, rebuilt));

    worst_mean = std::max(
        worst_mean, attention::row_mean(attention::center_rows(Tensor::randn({M, D}, rng, 5.0)))
                        .max_abs());
  }

  for (AttentionType type : {AttentionType::dnl, AttentionType::nl}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::size_t> perm(9);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      AttnInputs s = attn_inputs(50 + trial);
      const Tensor y = attn_forward(s, type);
      AttnInputs p = attn_inputs(50 + trial);
      for (Tensor* t : {&p.h, &p.l, &p.f}) *t = permute_pixels(*t, perm);
      worst_perm = std::max(worst_perm, max_abs_diff(attn_forward(p, type), permute_pixels(y, perm)));
    }
  }

  c.expect(worst_sum <= 1e-9, "softmax row sum off by " + fmt("%.2e", worst_sum));
  c.expect(worst_split <= 1e-9, "decomposition off by " + fmt("%.2e", worst_split));
  c.expect(worst_mean <= 1e-12, "centred mean " + fmt("%.2e", worst_mean));
  c.expect(worst_perm <= 1e-12, "permutation off by " + fmt("%.2e", worst_perm));
  return c.outcome("row sums " + fmt("%.1e", worst_sum) + ", decomposition " +
                   fmt("%.1e", worst_split) + " (<= 1e-9); centring " + fmt("%.1e", worst_mean) +
                   ", permutation " + fmt("%.1e", worst_perm) + " (<= 1e-12)");
}

// ---------------------------------------------------------------- 3

Outcome metric_oracles() {
  Checks c;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 2 + trial % 14;
    std::uniform_int_distribution<long> count(0, 50);
    std::vector<std::vector<long>> rows(K, std::vector<long>(K));
    ConfusionMatrix cm(K);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) {
        rows[i][j] = count(rng) + (i == j ? 1 : 0);
        cm.add(int(i), int(j), rows[i][j]);
      }
    const RunMetrics m = compute_metrics(cm);
    double total = 0, diag = 0, recall = 0;
    for (std::size_t i = 0; i < K; ++i) {
      const double row = double(std::accumulate(rows[i].begin(), rows[i].end(), 0L));
      total += row;
      diag += double(rows[i][i]);
      recall += double(rows[i][i]) / row;
    }
    worst = std::max({worst, std::abs(m.oa - 100.0 * diag / total),
                      std::abs(m.aa - 100.0 * recall / double(K)),
                      std::abs(m.kappa - oracle::kappa_from_first_principles(rows))});
  }
  c.expect(worst <= 1e-12, "brute-force mismatch " + fmt("%.2e", worst));

  ConfusionMatrix perfect(5), uniform(5);
  for (int i = 0; i < 5; ++i) {
    perfect.add(i, i, 7);
    for (int j = 0; j < 5; ++j) uniform.add(i, j, 3);
  }
  const RunMetrics p = compute_metrics(perfect), u = compute_metrics(uniform);
  c.expect(p.kappa == 1.0 && p.oa == 100.0 && p.aa == 100.0, "perfect diagonal not exact");
  c.expect(u.kappa == 0.0, "uniform kappa " + fmt("%.17g", u.kappa));
  return c.outcome("1000 matrices within " + fmt("%.1e", worst) +
                   " (<= 1e-12); perfect kappa 1.0, uniform kappa 0.0 exactly");
}

// ---------------------------------------------------------------- 4

Outcome overfit_smoke() {
  const auto start = std::chrono::steady_clock::now();
  SceneSpec spec;
  spec.height = spec.width = 32;
  spec.bands = 8;
  auto scene = std::make_shared<SceneData>(synth_scene(spec));
  normalize_bands(scene->hsi);
  normalize_bands(scene->lidar);
  const PatchDataset full = sample_patches(scene, 7, ClassCounts::uniform(6, 2, 0), 3);
  std::vector<PixelSample> eight(full.samples(Split::train).begin(),
                                 full.samples(Split::train).begin() + 8);
  const PatchDataset batch(scene, 7, 6, eight, eight);

  ModelConfig mc;
  mc.extractor.hsi_bands = 8;
  mc.extractor.patch_size = 7;
  mc.extractor.feature_channels = 8;
  mc.extractor.residual_blocks = 1;
  mc.extractor.lidar_layers = 2;
  mc.attention.embed_channels = 4;
  mc.classes = 6;
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 8;

  auto run = [&] {
    Model model(mc, 11);
    const TrainResult r = train(model, batch, tc, 11);
    return std::pair{r.epoch_loss, evaluate(model, batch, Split::train).oa};
  };
  const auto [loss_a, oa_a] = run();
  const auto [loss_b, oa_b] = run();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Checks c;
  c.expect(oa_a == 100.0, "training accuracy " + fmt("%.2f%%", oa_a));
  c.expect(loss_a == loss_b && oa_a == oa_b, "same seed gave different runs");
  c.expect(seconds < 60.0, "runtime " + fmt("%.1f s", seconds));
  return c.outcome("8 samples at " + fmt("%.0f%%", oa_a) +
                   " after 200 epochs, repeat identical, " + fmt("%.1f s", seconds) +
                   " for both runs < 60 s");
}

// ---------------------------------------------------------------- 5, 6

// Confounded 6-class scene shared by the fusion and NL/DNL criteria.
const char* kSyntheticConfig = R"(scene.classes = 6
scene.height = 64
scene.width = 64
scene.bands = 16
scene.noise_sigma = 0.05
scene.seed = 7
sample.train_per_class = 60
sample.test_per_class = 40
sample.seed = 11
extractor.patch_size = 7
extractor.feature_channels = 16
extractor.residual_blocks = 1
extractor.lidar_layers = 2
attention.embed_channels = 8
train.lr = 0.001
train.epochs = 60
train.batch_size = 16
train.repetitions = 5
)";

struct Synthetic {
  ExperimentConfig config = parse_config(kSyntheticConfig);
  std::shared_ptr<SceneData> scene = load_scene(config);
  PatchDataset data = build_dataset(config, scene);
  ModelConfig model = model_config(config, scene->hsi.bands);
};

Outcome fusion_benefit(const Synthetic& s) {
  const std::vector<WiringConfig> wirings{WiringConfig::parse("F H L H"),
                                          WiringConfig::parse("H H H H"),
                                          WiringConfig::parse("L L L L")};
  const auto rows = ablate(s.model, s.data, wirings, s.config.train);
  Checks c;
  for (const auto& r : rows) c.expect(r.error.empty(), r.wiring.to_string() + ": " + r.error);
  const double f = rows[0].oa.mean, h = rows[1].oa.mean, l = rows[2].oa.mean;
  c.expect(f > h, "fused not above HSI-only");
  c.expect(f > l, "fused not above LiDAR-only");
  c.expect(l < h, "LiDAR-only not worst");
  return c.outcome("mean OA over 5 seeds: F H L H " + fmt("%.2f", f) + " > H H H H " +
                   fmt("%.2f", h) + " > L L L L " + fmt("%.2f", l));
}

Outcome nl_vs_dnl(const Synthetic& s) {
  const auto start = std::chrono::steady_clock::now();
  const Comparison cmp = compare_nl_dnl(s.model, s.data, s.config.train);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Checks c;
  c.expect(cmp.dnl.oa.mean >= cmp.nl.oa.mean - 1.0, "DNL more than 1 point below NL");
  c.expect(seconds < 900.0, "runtime " + fmt("%.0f s", seconds));
  return c.outcome("paired 5 seeds: DNL " + fmt("%.2f", cmp.dnl.oa.mean) + " >= NL " +
                   fmt("%.2f", cmp.nl.oa.mean) + " - 1.0, " + fmt("%.0f s", seconds) +
                   " < 900 s");
}

// ---------------------------------------------------------------- 7

Outcome io_fidelity() {
  Checks c;
  const fs::path dir = scratch("io");
  std::mt19937_64 rng(7);

  Raster r(13, 9, 5);
  std::uniform_real_distribution<float> value(-1e6f, 1e6f);
  for (float& v : r.values) v = value(rng);
  r.values[0] = -0.0f;
  r.values[1] = std::numeric_limits<float>::denorm_min();
  save_raster(dir / "r.hdr", r);
  const Raster back = load_raster(dir / "r.hdr");
  c.expect(back.values.size() == r.values.size() &&
               std::memcmp(back.values.data(), r.values.data(), r.values.size() * 4) == 0,
           "raster round trip");

  TensorMap tensors;
  tensors["a"] = Tensor::randn({3, 4, 2}, rng, 1e3);
  tensors["b"] = Tensor({2}, {-0.0, std::numeric_limits<double>::denorm_min()});
  save_checkpoint(dir / "m.ckpt", tensors);
  const TensorMap loaded = load_checkpoint(dir / "m.ckpt");
  bool same = loaded.size() == tensors.size();
  for (const auto& [name, t] : tensors) {
    same = same && loaded.count(name) && loaded.at(name).shape() == t.shape() &&
           std::memcmp(loaded.at(name).data().data(), t.data().data(), t.size() * 8) == 0;
  }
  c.expect(same, "checkpoint round trip");

  for (std::size_t classes : {2u, 6u, 15u, 40u}) {
    LabelRaster map(11, 7);
    std::uniform_int_distribution<int> cls(0, int(classes));
    for (auto& v : map.values) v = std::int16_t(cls(rng));
    const Palette palette = default_palette(classes);
    const LabelRaster decoded = decode_class_map(parse_ppm(render_ppm(map, palette)), palette);
    c.expect(decoded.values == map.values, "PPM round trip with " + std::to_string(classes));
  }

  const ExperimentConfig tiny = parse_config(R"(scene.classes = 3
scene.height = 16
scene.width = 16
scene.bands = 4
sample.train_per_class = 4
sample.test_per_class = 6
extractor.patch_size = 5
extractor.feature_channels = 4
extractor.residual_blocks = 1
extractor.lidar_layers = 1
attention.embed_channels = 2
train.epochs = 2
train.batch_size = 4
train.repetitions = 2
)");
  std::ostringstream log;
  for (const char* run : {"a", "b"}) {
    c.expect(run_command("train", tiny, dir / run, log) == 0, "train failed");
    c.expect(run_command("eval", tiny, dir / run, log) == 0, "eval failed");
  }
  for (const char* file : {"metrics.txt", "metrics.csv", "confusion.csv", "loss_history.csv"}) {
    const std::string a = read_file(dir / "a" / file);
    c.expect(!a.empty() && a == read_file(dir / "b" / file),
             std::string(file) + " differs between same-seed runs");
  }
  return c.outcome("raster and checkpoint bit-exact, PPM class ids exact for 2/6/15/40 classes, "
                   "same-seed metric files byte-identical");
}

// ---------------------------------------------------------------- 8

Outcome houston_readiness() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = scratch("houston");
  constexpr std::size_t W = 1905, H = 349, B = 144;
  std::mt19937_64 rng(8);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  {
    Raster hsi(W, H, B);
    for (float& v : hsi.values) v = noise(rng);
    save_raster(dir / "hsi.hdr", hsi);
  }
  Raster lidar(W, H, 1);
  for (float& v : lidar.values) v = noise(rng);
  save_raster(dir / "lidar.hdr", lidar);
  // Classes 1..15 repeat along each row; 0 marks unlabeled pixels.
  LabelRaster labels(W, H);
  for (std::size_t i = 0; i < labels.values.size(); ++i) labels.values[i] = std::int16_t(i % 16);
  save_labels(dir / "labels.hdr", labels);

  const ClassCounts table = houston_counts();
  std::string train_counts, names;
  for (std::size_t k = 0; k < table.classes(); ++k) {
    train_counts += (k ? " " : "") + std::to_string(table.train[k]);
    names += (k ? ", " : "") + houston_class_names()[k];
  }
  std::ofstream(dir / "houston.cfg")
      << "data.hsi = hsi.hdr\ndata.lidar = lidar.hdr\ndata.labels = labels.hdr\n"
      << "data.train_counts = " << train_counts << "\n"
      << "data.test_counts = 10 10 10 10 10 10 10 10 10 10 10 10 10 10 10\n"
      << "data.class_names = " << names << "\n"
      << "extractor.patch_size = 7\nextractor.feature_channels = 8\n"
      << "extractor.residual_blocks = 1\nextractor.lidar_layers = 1\n"
      << "attention.embed_channels = 4\n"
      << "train.epochs = 10\ntrain.batch_size = 64\ntrain.repetitions = 1\n";

  Checks c;
  const ExperimentConfig config = load_config(dir / "houston.cfg");
  const auto scene = load_scene(config);
  c.expect(scene->hsi.width == W && scene->hsi.height == H && scene->hsi.bands == B,
           "raster geometry");
  const PatchDataset data = build_dataset(config, scene);
  c.expect(data.samples(Split::train).size() == 2832, "train split size " +
                                                          std::to_string(data.samples(Split::train).size()));
  std::ostringstream log;
  c.expect(run_command("train", config, dir / "run", log) == 0, "train failed");
  c.expect(run_command("eval", config, dir / "run", log) == 0, "eval failed");
  c.expect(fs::exists(dir / "run" / "metrics.txt"), "metrics.txt missing");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::remove_all(dir);
  return c.outcome("1905x349x144 rasters, 2832 train samples, 10-epoch train and eval in " +
                   fmt("%.0f s", seconds));
}

}  // namespace

int main() {
  using Criterion = std::pair<const char*, std::function<Outcome()>>;
  std::unique_ptr<Synthetic> synthetic;
  auto shared = [&]() -> const Synthetic& {
    if (!synthetic) synthetic = std::make_unique<Synthetic>();
    return *synthetic;
  };
  const std::vector<Criterion> criteria{
      {"gradient correctness", gradient_correctness},
      {"attention identities", attention_identities},
      {"metric oracles", metric_oracles},
      {"overfit smoke test", overfit_smoke},
      {"fusion benefit", [&] { return fusion_benefit(shared()); }},
      {"NL vs DNL direction", [&] { return nl_vs_dnl(shared()); }},
      {"I/O fidelity", io_fidelity},
      {"Houston readiness", houston_readiness},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
