#pragma once

// Disentangled non-local (DNL) attention over the H / L / F feature maps and
// the coupled non-local (NL) baseline.
//
// For one sample with M = height * width pixels, q and k are [M, d] query
// and key embeddings, v is the [M, C] value embedding and s is a per-pixel
// unary logit:
//
//   DNL:  y_m = sum_n softmax_n((q_m - u_q) . (k_n - u_k)) v_n
//             + sum_n softmax_n(s_n) v_n
//   NL:   y_m = sum_n softmax_n(q_m . k_n) v_n
//
// with u_q, u_k the means of q and k over all M pixels. Both variants add the
// value-source map back onto y.

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <string_view>

#include "dnl/parameters.hpp"

namespace dnl {

enum class Source { H, L, F };

char source_token(Source s);
Source parse_source(std::string_view token);

/// Which feature map feeds each attention branch.
struct WiringConfig {
  Source value = Source::F;
  Source key = Source::H;
  Source query = Source::L;
  Source unary = Source::H;

  /// Four space-separated tokens in value, key, query, unary order,
  /// e.g. "F H L H".
  std::string to_string() const;
  static WiringConfig parse(std::string_view text);
  friend bool operator==(const WiringConfig&, const WiringConfig&) = default;
};

enum class AttentionType { dnl, nl };

std::string_view attention_type_name(AttentionType type);
AttentionType parse_attention_type(std::string_view text);

struct AttentionConfig {
  AttentionType type = AttentionType::dnl;
  std::size_t embed_channels = 32;
  WiringConfig wiring;

  friend bool operator==(const AttentionConfig&, const AttentionConfig&) = default;
};

/// H, L and F for one batch; all three share one [N, C, H, W] shape.
struct FeatureMaps {
  Var hsi;
  Var lidar;
  Var fused;

  Var select(Source s) const;
};

/// Row-normalised attention matrices of a single sample.
struct AttentionWeights {
  Tensor pairwise;  // [M, M]
  Tensor unary;     // [M]
};

}  // namespace dnl

namespace dnl::attention {

/// Registers the bias-free "attn.query", "attn.key" (C -> embed) and
/// "attn.unary" (C -> 1) 1x1 convolutions plus "attn.value" (C -> C, biased).
void init_params(ParameterStore& store, std::size_t feature_channels,
                 std::size_t embed_channels, std::mt19937_64& rng);

/// 1x1 convolution with `<prefix>.w` (and `<prefix>.b` when present),
/// flattened to [N, M, out_channels].
Var embed(Binder& bind, const std::string& prefix, Var source);

Var dnl_forward(Binder& bind, const FeatureMaps& maps, const WiringConfig& wiring);
Var nl_forward(Binder& bind, const FeatureMaps& maps, const WiringConfig& wiring);
Var forward(Binder& bind, const FeatureMaps& maps, const AttentionConfig& config);

// Single-sample tensor routines ([M, d] rows = pixels). These share the
// kernels used by the graph path and back the identity checks.

/// Spatial mean of the rows of `x`: [M, d] -> [d].
Tensor row_mean(const Tensor& x);
/// x - mean over rows.
Tensor center_rows(const Tensor& x);
/// logits[m, n] = (q_m - u_q) . (k_n - u_k).
Tensor whitened_pairwise_logits(const Tensor& q, const Tensor& k);
/// logits[m, n] = q_m . k_n.
Tensor coupled_logits(const Tensor& q, const Tensor& k);
/// u_q . k_n + (q_m - u_q) . (k_n - u_k) + q_m . u_k - u_q . u_k, i.e. the
/// unary + whitened pairwise split with the m-only terms put back.
Tensor reconstructed_coupled_logits(const Tensor& q, const Tensor& k);
/// One logit per pixel: source [M, C] times unary weights [1, C, 1, 1] -> [M].
Tensor unary_logits(const Tensor& source, const Tensor& weights);
/// Softmax over the key (last) axis of [M, N] or [N].
Tensor softmax_over_keys(const Tensor& logits);
AttentionWeights dnl_weights(const Tensor& q, const Tensor& k, const Tensor& unary);

}  // namespace dnl::attention
