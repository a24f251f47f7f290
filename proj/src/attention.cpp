#include "dnl/attention.hpp"

#include <cmath>
#include <sstream>

#include "dnl/errors.hpp"
#include "dnl/kernels.hpp"

namespace dnl {

char source_token(Source s) {
  switch (s) {
    case Source::H: return 'H';
    case Source::L: return 'L';
    case Source::F: return 'F';
  }
  return '?';
}

Source parse_source(std::string_view token) {
  if (token == "H" || token == "h") return Source::H;
  if (token == "L" || token == "l") return Source::L;
  if (token == "F" || token == "f") return Source::F;
  throw ConfigError("wiring source must be one of H, L, F; got '" + std::string(token) + "'");
}

std::string WiringConfig::to_string() const {
  return std::string{source_token(value), ' ', source_token(key), ' ', source_token(query),
                     ' ', source_token(unary)};
}

WiringConfig WiringConfig::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  if (tokens.size() != 4) {
    throw ConfigError("wiring needs four tokens (value key query unary), got '" +
                      std::string(text) + "'");
  }
  return {parse_source(tokens[0]), parse_source(tokens[1]), parse_source(tokens[2]),
          parse_source(tokens[3])};
}

std::string_view attention_type_name(AttentionType type) {
  return type == AttentionType::dnl ? "dnl" : "nl";
}

AttentionType parse_attention_type(std::string_view text) {
  if (text == "dnl") return AttentionType::dnl;
  if (text == "nl") return AttentionType::nl;
  throw ConfigError("attention.type must be 'dnl' or 'nl', got '" + std::string(text) + "'");
}

Var FeatureMaps::select(Source s) const {
  Var v = s == Source::H ? hsi : s == Source::L ? lidar : fused;
  if (!v.valid()) {
    throw ConfigError(std::string("feature map ") + source_token(s) + " was not computed");
  }
  return v;
}

}  // namespace dnl

namespace dnl::attention {
namespace {

// Maps the wiring does not read may be left unset.
void check_maps(const FeatureMaps& maps) {
  const Shape* shape = nullptr;
  std::string seen;
  for (auto [name, v] : {std::pair{"H", maps.hsi}, std::pair{"L", maps.lidar},
                         std::pair{"F", maps.fused}}) {
    if (!v.valid()) continue;
    seen += std::string(" ") + name + " " + shape_string(v.shape());
    if (shape && *shape != v.shape()) {
      throw ShapeError("attention inputs disagree in shape:" + seen);
    }
    shape = &v.shape();
  }
}

Var finish(const FeatureMaps& maps, const WiringConfig& wiring, Var tokens) {
  const Var residual = maps.select(wiring.value);
  return ops::add(ops::from_tokens(tokens, residual.shape()[2], residual.shape()[3]), residual);
}

void need_rows(const Tensor& t, const char* what) { expect_rank(t, 2, what); }

}  // namespace

void init_params(ParameterStore& store, std::size_t feature_channels,
                 std::size_t embed_channels, std::mt19937_64& rng) {
  if (embed_channels == 0) throw ConfigError("attention.embed_channels must be positive");
  const std::size_t C = feature_channels;
  store.add_he("attn.query.w", {embed_channels, C, 1, 1}, C, rng);
  store.add_he("attn.key.w", {embed_channels, C, 1, 1}, C, rng);
  store.add_he("attn.value.w", {C, C, 1, 1}, C, rng);
  store.add("attn.value.b", Tensor({C}, 0.0));
  store.add_he("attn.unary.w", {1, C, 1, 1}, C, rng);
}

Var embed(Binder& bind, const std::string& prefix, Var source) {
  const std::string bias = prefix + ".b";
  Var b = bind.has(bias) ? bind(bias) : Var{};
  return ops::to_tokens(ops::conv2d(source, bind(prefix + ".w"), b, 1, 0));
}

Var dnl_forward(Binder& bind, const FeatureMaps& maps, const WiringConfig& wiring) {
  check_maps(maps);
  const Var q = embed(bind, "attn.query", maps.select(wiring.query));
  const Var k = embed(bind, "attn.key", maps.select(wiring.key));
  const Var v = embed(bind, "attn.value", maps.select(wiring.value));
  const Var s = embed(bind, "attn.unary", maps.select(wiring.unary));  // [N, M, 1]

  const Var pairwise =
      ops::softmax(ops::matmul(ops::center_tokens(q), ops::center_tokens(k), false, true));
  const std::size_t N = s.shape()[0], M = s.shape()[1];
  const Var unary = ops::softmax(ops::reshape(s, {N, 1, M}));
  const Var y = ops::add_broadcast_rows(ops::matmul(pairwise, v), ops::matmul(unary, v));
  return finish(maps, wiring, y);
}

Var nl_forward(Binder& bind, const FeatureMaps& maps, const WiringConfig& wiring) {
  check_maps(maps);
  const Var q = embed(bind, "attn.query", maps.select(wiring.query));
  const Var k = embed(bind, "attn.key", maps.select(wiring.key));
  const Var v = embed(bind, "attn.value", maps.select(wiring.value));
  const Var weights = ops::softmax(ops::matmul(q, k, false, true));
  return finish(maps, wiring, ops::matmul(weights, v));
}

Var forward(Binder& bind, const FeatureMaps& maps, const AttentionConfig& config) {
  return config.type == AttentionType::dnl ? dnl_forward(bind, maps, config.wiring)
                                           : nl_forward(bind, maps, config.wiring);
}

Tensor row_mean(const Tensor& x) {
  need_rows(x, "row_mean");
  const std::size_t M = x.dim(0), D = x.dim(1);
  Tensor mean({D});
  for (std::size_t j = 0; j < D; ++j) {
    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += x[m * D + j];
    mean[j] = s / static_cast<double>(M);
  }
  return mean;
}

Tensor center_rows(const Tensor& x) {
  const Tensor mean = row_mean(x);
  Tensor out = x;
  const std::size_t M = x.dim(0), D = x.dim(1);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t j = 0; j < D; ++j) out[m * D + j] -= mean[j];
  return out;
}

Tensor coupled_logits(const Tensor& q, const Tensor& k) {
  need_rows(q, "coupled_logits q");
  need_rows(k, "coupled_logits k");
  if (q.dim(1) != k.dim(1)) {
    throw ShapeError("query and key embeddings differ in width: " + shape_string(q.shape()) +
                     " vs " + shape_string(k.shape()));
  }
  Tensor out({q.dim(0), k.dim(0)});
  kernels::batched_gemm({1, q.dim(0), q.dim(1), k.dim(0), false, true}, q.data(), k.data(),
                        out.data(), false);
  return out;
}

Tensor whitened_pairwise_logits(const Tensor& q, const Tensor& k) {
  need_rows(q, "whitened_pairwise_logits q");
  need_rows(k, "whitened_pairwise_logits k");
  return coupled_logits(center_rows(q), center_rows(k));
}

Tensor reconstructed_coupled_logits(const Tensor& q, const Tensor& k) {
  const Tensor pair = whitened_pairwise_logits(q, k);
  const Tensor uq = row_mean(q), uk = row_mean(k);
  const std::size_t M = q.dim(0), N = k.dim(0), D = q.dim(1);
  auto dot = [D](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t j = 0; j < D; ++j) s += a[j] * b[j];
    return s;
  };
  const double uq_uk = dot(uq.data().data(), uk.data().data());
  Tensor out({M, N});
  for (std::size_t m = 0; m < M; ++m) {
    const double qm_uk = dot(q.data().data() + m * D, uk.data().data());
    for (std::size_t n = 0; n < N; ++n) {
      const double unary = dot(uq.data().data(), k.data().data() + n * D);
      out[m * N + n] = unary + pair[m * N + n] + qm_uk - uq_uk;
    }
  }
  return out;
}

Tensor unary_logits(const Tensor& source, const Tensor& weights) {
  need_rows(source, "unary_logits source");
  const std::size_t M = source.dim(0), C = source.dim(1);
  expect_shape(weights, {1, C, 1, 1}, "unary_logits weights");
  Tensor out({M});
  kernels::batched_gemm({1, M, C, 1, false, false}, source.data(), weights.data(), out.data(),
                        false);
  return out;
}

Tensor softmax_over_keys(const Tensor& logits) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw ShapeError("softmax_over_keys expects [M, N] or [N], got " +
                     shape_string(logits.shape()));
  }
  const std::size_t cols = logits.shape().back();
  Tensor out(logits.shape());
  kernels::softmax_rows(logits.size() / cols, cols, logits.data(), out.data());
  return out;
}

AttentionWeights dnl_weights(const Tensor& q, const Tensor& k, const Tensor& unary) {
  return {softmax_over_keys(whitened_pairwise_logits(q, k)), softmax_over_keys(unary)};
}

}  // namespace dnl::attention
