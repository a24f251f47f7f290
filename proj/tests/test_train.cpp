#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "dnl/errors.hpp"
#include "dnl/scene.hpp"
#include "dnl/train.hpp"

using namespace dnl;

namespace {

ModelConfig small_model(std::size_t bands, std::size_t classes) {
  ModelConfig mc;
  mc.extractor.hsi_bands = bands;
  mc.extractor.patch_size = 7;
  mc.extractor.feature_channels = 8;
  mc.extractor.residual_blocks = 1;
  mc.extractor.lidar_layers = 2;
  mc.attention.embed_channels = 4;
  mc.classes = classes;
  return mc;
}

std::shared_ptr<SceneData> small_scene(std::uint64_t seed = 7) {
  SceneSpec spec;
  spec.height = spec.width = 32;
  spec.bands = 8;
  spec.seed = seed;
  auto scene = std::make_shared<SceneData>(synth_scene(spec));
  normalize_bands(scene->hsi);
  normalize_bands(scene->lidar);
  return scene;
}

PatchDataset small_dataset(std::size_t train, std::size_t test) {
  return sample_patches(small_scene(), 7, ClassCounts::uniform(6, train, test), 5);
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 8;
  tc.repetitions = 2;
  return tc;
}

}  // namespace

TEST(Train, OverfitsSingleBatch) {
  const auto scene = small_scene();
  const PatchDataset full = sample_patches(scene, 7, ClassCounts::uniform(6, 2, 0), 3);
  std::vector<PixelSample> eight(full.samples(Split::train).begin(),
                                 full.samples(Split::train).begin() + 8);
  const PatchDataset one_batch(scene, 7, 6, eight, eight);
  Model model(small_model(8, 6), 11);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 8;
  train(model, one_batch, tc, 11);
  EXPECT_EQ(evaluate(model, one_batch, Split::train).oa, 100.0);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const PatchDataset d = small_dataset(4, 2);
  Model model(small_model(8, 6), 1);
  const TensorMap before = model.parameters().values();
  TrainConfig tc = quick(2);
  tc.learning_rate = 0.0;
  train(model, d, tc, 1);
  EXPECT_EQ(model.parameters().values(), before);
}

TEST(Train, SameSeedSameLossHistory) {
  const PatchDataset d = small_dataset(6, 4);
  auto run = [&] {
    Model model(small_model(8, 6), 4);
    return train(model, d, quick(3), 4).epoch_loss;
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, LossDecreasesOnSmokeConfig) {
  const PatchDataset d = small_dataset(8, 4);
  Model model(small_model(8, 6), 2);
  const double before = dataset_loss(model, d, Split::train);
  train(model, d, quick(15), 2);
  EXPECT_LE(dataset_loss(model, d, Split::train), before);
}

TEST(Train, NonFiniteLossNamesStep) {
  const PatchDataset d = small_dataset(2, 1);
  Model model(small_model(8, 6), 1);
  model.parameters().at("head.b")[2] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(model, d, quick(1), 1);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, step 1"), std::string::npos) << e.what();
  }
}

TEST(Train, ClassCountMismatchRejected) {
  const PatchDataset d = small_dataset(2, 1);
  Model model(small_model(8, 4), 1);
  EXPECT_THROW(train(model, d, quick(1), 1), ConfigError);
}

TEST(Train, ConfigValidation) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate());
  for (auto mutate : {+[](TrainConfig& c) { c.epochs = 0; }, +[](TrainConfig& c) { c.batch_size = 0; },
                      +[](TrainConfig& c) { c.repetitions = 0; },
                      +[](TrainConfig& c) { c.learning_rate = -1; }}) {
    TrainConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), ConfigError);
  }
}

TEST(Train, BatchScheduleIsPermutationAndSeeded) {
  const auto a = batch_schedule(23, 5, 9, 0);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a.back().size(), 3u);
  std::vector<std::size_t> all;
  for (const auto& b : a) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 23; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(a, batch_schedule(23, 5, 9, 0));
  EXPECT_NE(a, batch_schedule(23, 5, 9, 1));
  EXPECT_NE(a, batch_schedule(23, 5, 10, 0));
}

TEST(Train, ArgmaxTiesPickLowestIndex) {
  EXPECT_EQ(argmax_rows(Tensor({2, 3}, {1, 1, 0, 0, 2, 2})), (std::vector<int>{0, 1}));
}

TEST(Train, ModelRequiresTwoClasses) {
  ModelConfig mc = small_model(8, 1);
  EXPECT_THROW(Model(mc, 1), ConfigError);
}

TEST(Pipeline, SingleWiringGridHasOneRow) {
  const PatchDataset d = small_dataset(3, 2);
  TrainConfig tc = quick(1);
  tc.repetitions = 1;
  const auto rows = ablate(small_model(8, 6), d, {WiringConfig::parse("L H L H")}, tc);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].error.empty());
  const std::string csv = format_ablation_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "row,value,key,query,unary,oa_mean,oa_std,status");
}

TEST(Pipeline, DefaultGridHasEightDistinctWirings) {
  const auto grid = default_ablation_wirings();
  ASSERT_EQ(grid.size(), 8u);
  std::set<std::string> distinct;
  for (const auto& w : grid) distinct.insert(w.to_string());
  EXPECT_EQ(distinct.size(), 8u);
  EXPECT_TRUE(distinct.count("F H L H"));
  EXPECT_TRUE(distinct.count("L L L L"));
  EXPECT_TRUE(distinct.count("H H H H"));
}

TEST(Pipeline, AblationRowErrorsDoNotAbortGrid) {
  const PatchDataset d = small_dataset(3, 2);
  TrainConfig tc = quick(1);
  tc.repetitions = 1;
  ModelConfig mc = small_model(8, 6);
  mc.classes = 5;  // every row fails the class-count check
  const auto rows = ablate(mc, d, default_ablation_wirings(), tc);
  ASSERT_EQ(rows.size(), 8u);
  for (const auto& r : rows) EXPECT_FALSE(r.error.empty());
}

TEST(Pipeline, CompareRunsArePairedAndDeterministic) {
  const PatchDataset d = small_dataset(4, 4);
  TrainConfig tc = quick(2);
  const Comparison a = compare_nl_dnl(small_model(8, 6), d, tc);
  const Comparison b = compare_nl_dnl(small_model(8, 6), d, tc);
  EXPECT_EQ(format_comparison_csv(a), format_comparison_csv(b));
  EXPECT_EQ(a.nl.repetitions, 2u);
  EXPECT_EQ(a.dnl.repetitions, 2u);
  const std::string csv = format_comparison_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "attention,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std");
}

TEST(Pipeline, RepeatedRunsUseConsecutiveSeeds) {
  const PatchDataset d = small_dataset(4, 4);
  TrainConfig tc = quick(2);
  tc.repetitions = 1;
  const MetricsReport single = run_repeated(small_model(8, 6), d, tc);
  tc.repetitions = 2;
  const MetricsReport pair = run_repeated(small_model(8, 6), d, tc);
  EXPECT_EQ(single.confusion, pair.confusion);  // report keeps the first repetition's matrix
}
