#include <random>

#include "dnl/attention.hpp"
#include "dnl/extractors.hpp"
#include "dnl/gradcheck.hpp"
#include "dnl/model.hpp"
#include "dnl/ops.hpp"

namespace dnl {
namespace {

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Projects an op's output onto fixed random weights so every output element
// contributes to the scalar being differentiated.
double projected(Var out, const Tensor& weights) {
  const Tensor& v = out.value();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * weights[i];
  return s;
}

void check_op(std::vector<GradCheckResult>& results, const std::string& name,
              const std::vector<Tensor>& inputs, const Builder& build, std::mt19937_64& rng,
              const GradCheckOptions& options) {
  Tensor weights;
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      vars.push_back(g.parameter("in" + std::to_string(i), inputs[i]));
    }
    const Var out = build(g, vars);
    weights = Tensor::randn(out.shape(), rng);
    g.backward(ops::sum(ops::mul(out, g.constant(weights))));
    for (const Var& v : vars) {
      analytic.push_back(g.gradient(v).value_or(Tensor(v.shape())));
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Tensor& probe) {
      Graph g;
      std::vector<Var> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        vars.push_back(g.constant(j == i ? probe : inputs[j]));
      }
      return projected(build(g, vars), weights);
    };
    results.push_back(check_gradient(name + "/in" + std::to_string(i), f, inputs[i],
                                     analytic[i], options));
  }
}

// Checks every parameter of `store` for a scalar loss built on a fresh graph.
void check_store(std::vector<GradCheckResult>& results, const std::string& name,
                 ParameterStore& store, const std::function<Var(Binder&)>& loss_fn,
                 const GradCheckOptions& options) {
  Gradients grads;
  {
    Graph g;
    Binder bind(g, store);
    g.backward(loss_fn(bind));
    grads = g.parameter_gradients();
  }
  for (auto& [pname, value] : store.values()) {
    const Tensor original = value;
    const auto it = grads.find(pname);
    const Tensor analytic = it != grads.end() ? it->second : Tensor(original.shape());
    auto f = [&](const Tensor& probe) {
      store.at(pname) = probe;
      Graph g;
      Binder bind(g, store);
      const double loss = loss_fn(bind).value()[0];
      store.at(pname) = original;
      return loss;
    };
    results.push_back(check_gradient(name + "/" + pname, f, original, analytic, options));
  }
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed,
                                                 const GradCheckOptions& options) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;
  auto randn = [&](Shape s, double sd = 1.0) { return Tensor::randn(std::move(s), rng, sd); };

  // Elementwise and shape operations.
  check_op(results, "add", {randn({2, 3}), randn({2, 3})},
           [](Graph&, const std::vector<Var>& v) { return ops::add(v[0], v[1]); }, rng, options);
  check_op(results, "mul", {randn({2, 3}), randn({2, 3})},
           [](Graph&, const std::vector<Var>& v) { return ops::mul(v[0], v[1]); }, rng, options);
  check_op(results, "scale", {randn({5})},
           [](Graph&, const std::vector<Var>& v) { return ops::scale(v[0], -2.5); }, rng, options);
  check_op(results, "relu", {randn({4, 5})},
           [](Graph&, const std::vector<Var>& v) { return ops::relu(v[0]); }, rng, options);
  check_op(results, "reshape", {randn({2, 6})},
           [](Graph&, const std::vector<Var>& v) { return ops::reshape(v[0], {3, 4}); }, rng,
           options);

  // Convolutions and pooling.
  check_op(results, "conv2d_pad1", {randn({2, 3, 5, 5}), randn({4, 3, 3, 3}), randn({4})},
           [](Graph&, const std::vector<Var>& v) { return ops::conv2d(v[0], v[1], v[2], 1, 1); },
           rng, options);
  check_op(results, "conv2d_stride2", {randn({1, 2, 7, 7}), randn({3, 2, 3, 3}), randn({3})},
           [](Graph&, const std::vector<Var>& v) { return ops::conv2d(v[0], v[1], v[2], 2, 0); },
           rng, options);
  check_op(results, "depthwise_multiscale_conv",
           {randn({2, 8, 6, 6}), randn({2, 1, 1, 1}), randn({2, 1, 3, 3}), randn({2, 1, 5, 5}),
            randn({2, 1, 7, 7})},
           [](Graph&, const std::vector<Var>& v) {
             return ops::depthwise_multiscale_conv(v[0], {v[1], v[2], v[3], v[4]});
           },
           rng, options);
  check_op(results, "avgpool2d", {randn({2, 2, 5, 5})},
           [](Graph&, const std::vector<Var>& v) { return ops::avgpool2d(v[0], 2, 2); }, rng,
           options);
  check_op(results, "upsample_nearest", {randn({1, 2, 3, 3})},
           [](Graph&, const std::vector<Var>& v) { return ops::upsample_nearest(v[0], 2, 7, 7); },
           rng, options);
  check_op(results, "global_avg_pool", {randn({2, 3, 4, 4})},
           [](Graph&, const std::vector<Var>& v) { return ops::global_avg_pool(v[0]); }, rng,
           options);

  // Normalisation in both modes.
  {
    auto state = std::make_shared<BatchNormState>(3);
    state->running_mean = randn({3}, 0.5);
    state->running_var = Tensor::uniform({3}, rng, 0.5, 2.0);
    check_op(results, "batchnorm_train",
             {randn({3, 3, 4, 4}), Tensor::uniform({3}, rng, 0.5, 1.5), randn({3})},
             [state](Graph&, const std::vector<Var>& v) {
               BatchNormState scratch = *state;
               return ops::batchnorm(v[0], v[1], v[2], scratch, Mode::train);
             },
             rng, options);
    check_op(results, "batchnorm_eval",
             {randn({2, 3, 3, 3}), Tensor::uniform({3}, rng, 0.5, 1.5), randn({3})},
             [state](Graph&, const std::vector<Var>& v) {
               return ops::batchnorm(v[0], v[1], v[2], *state, Mode::eval);
             },
             rng, options);
  }

  // Head and loss.
  check_op(results, "linear", {randn({3, 4}), randn({2, 4}), randn({2})},
           [](Graph&, const std::vector<Var>& v) { return ops::linear(v[0], v[1], v[2]); }, rng,
           options);
  {
    const std::vector<int> labels{2, 0, 1, 2};
    check_op(results, "softmax_cross_entropy", {randn({4, 3})},
             [labels](Graph&, const std::vector<Var>& v) {
               return ops::softmax_cross_entropy(v[0], labels);
             },
             rng, options);
  }

  // Token-level attention building blocks.
  check_op(results, "to_tokens", {randn({2, 3, 2, 2})},
           [](Graph&, const std::vector<Var>& v) { return ops::to_tokens(v[0]); }, rng, options);
  check_op(results, "from_tokens", {randn({2, 6, 3})},
           [](Graph&, const std::vector<Var>& v) { return ops::from_tokens(v[0], 2, 3); }, rng,
           options);
  check_op(results, "center_tokens", {randn({2, 5, 3})},
           [](Graph&, const std::vector<Var>& v) { return ops::center_tokens(v[0]); }, rng,
           options);
  check_op(results, "softmax", {randn({2, 3, 5})},
           [](Graph&, const std::vector<Var>& v) { return ops::softmax(v[0]); }, rng, options);
  check_op(results, "add_broadcast_rows", {randn({2, 4, 3}), randn({2, 1, 3})},
           [](Graph&, const std::vector<Var>& v) { return ops::add_broadcast_rows(v[0], v[1]); },
           rng, options);
  for (int mode = 0; mode < 4; ++mode) {
    const bool ta = mode & 1, tb = mode & 2;
    const Shape as = ta ? Shape{2, 4, 3} : Shape{2, 3, 4};
    const Shape bs = tb ? Shape{2, 5, 4} : Shape{2, 4, 5};
    check_op(results, std::string("matmul_") + (ta ? "T" : "N") + (tb ? "T" : "N"),
             {randn(as), randn(bs)},
             [ta, tb](Graph&, const std::vector<Var>& v) { return ops::matmul(v[0], v[1], ta, tb); },
             rng, options);
  }

  // Extractors on a tiny configuration.
  ExtractorConfig ec;
  ec.hsi_bands = 5;
  ec.patch_size = 7;
  ec.feature_channels = 8;
  ec.residual_blocks = 1;
  ec.lidar_layers = 2;
  {
    ParameterStore store;
    std::mt19937_64 init(seed + 1);
    extractors::init_residual_block(store, "block", 8, init);
    const Tensor x = randn({2, 8, 5, 5});
    check_op(results, "residual_block/input", {x},
             [&store](Graph& g, const std::vector<Var>& v) {
               Binder bind(g, store);
               return extractors::residual_block(bind, "block", v[0], Mode::train);
             },
             rng, options);
    const Tensor w = randn({2, 8, 5, 5});
    check_store(results, "residual_block", store,
                [&](Binder& bind) {
                  Var y = extractors::residual_block(bind, "block", bind.graph().constant(x),
                                                     Mode::train);
                  return ops::sum(ops::mul(y, bind.graph().constant(w)));
                },
                options);
  }
  {
    ParameterStore store;
    std::mt19937_64 init(seed + 2);
    extractors::init_params(store, ec, init);
    const Tensor hsi = randn({2, 5, 7, 7});
    const Tensor lidar = randn({2, 1, 7, 7});
    const Tensor w = randn({2, 8, 7, 7});
    check_store(results, "extractors", store,
                [&](Binder& bind) {
                  Graph& g = bind.graph();
                  Var h = extractors::extract_hsi(bind, ec, g.constant(hsi), Mode::train);
                  Var l = extractors::extract_lidar(bind, ec, g.constant(lidar), Mode::train);
                  Var f = extractors::fuse(bind, h, l, Mode::train);
                  return ops::sum(ops::mul(ops::add(f, ops::add(h, l)), g.constant(w)));
                },
                options);
  }

  // Attention on 3x3 maps with 8 channels, with respect to H, L, F and weights.
  for (AttentionType type : {AttentionType::dnl, AttentionType::nl}) {
    ParameterStore store;
    std::mt19937_64 init(seed + 3);
    attention::init_params(store, 8, 4, init);
    const WiringConfig wiring = WiringConfig::parse("F H L H");
    const std::string name(attention_type_name(type));
    check_op(results, name + "_forward/maps",
             {randn({2, 8, 3, 3}), randn({2, 8, 3, 3}), randn({2, 8, 3, 3})},
             [&store, wiring, type](Graph& g, const std::vector<Var>& v) {
               Binder bind(g, store);
               return attention::forward(bind, {v[0], v[1], v[2]}, {type, 4, wiring});
             },
             rng, options);
    const Tensor h = randn({2, 8, 3, 3}), l = randn({2, 8, 3, 3}), f = randn({2, 8, 3, 3});
    const Tensor w = randn({2, 8, 3, 3});
    check_store(results, name + "_forward", store,
                [&](Binder& bind) {
                  Graph& g = bind.graph();
                  const FeatureMaps maps{g.constant(h), g.constant(l), g.constant(f)};
                  Var y = attention::forward(bind, maps, {type, 4, wiring});
                  return ops::sum(ops::mul(y, g.constant(w)));
                },
                options);
  }

  // Full model: 8 feature channels, 7x7 patches, 3 classes.
  {
    ModelConfig mc;
    mc.extractor = ec;
    mc.extractor.residual_blocks = 2;
    mc.extractor.lidar_layers = 3;
    mc.attention = {AttentionType::dnl, 4, WiringConfig::parse("F H L H")};
    mc.classes = 3;
    Model model(mc, seed + 4);
    const Batch batch{randn({3, 5, 7, 7}), randn({3, 1, 7, 7}), {0, 1, 2}};
    check_store(results, "model", model.parameters(),
                [&](Binder& bind) {
                  return ops::softmax_cross_entropy(model.forward(bind, batch, Mode::train),
                                                    batch.labels);
                },
                options);
  }
  return results;
}

}  // namespace dnl
