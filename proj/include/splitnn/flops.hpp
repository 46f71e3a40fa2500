// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-form per-layer FLOP model. Counts only layer forward/backward math;
// weight updates, gradient averaging and argmax are free. The same formulas
// price both the split roles and the monolithic oracle, so cost ratios reduce
// to exact integer arithmetic.
//
//   dense    fwd 2*in*out*B      bwd 4*in*out*B
//   conv2d   fwd 2*kh*kw*cin*cout*oh*ow*B   bwd twice that
//   relu / maxpool / flatten / concat: 1 per output element per direction
//   softmax_ce: 5*C*B per direction

#include <cstdint>

#include "splitnn/layers.hpp"

namespace splitnn {

enum class Direction : std::uint8_t { Forward, Backward };

namespace detail {

inline std::uint64_t elementwise_out_numel(const LayerSpec& s) {
  if (s.kind == LayerKind::Concat) return concat_total_width(s);
  Shape batched{1};
  for (auto d : s.in_shape) batched.push_back(d);
  Shape out = layer_output_shape(s, batched);
  std::uint64_t n = 1;
  for (std::size_t i = 1; i < out.size(); ++i) n *= out[i];
  return n;
}

}  // namespace detail

// FLOPs for one pass of one layer over a batch. Element-count-priced layers
// and conv need spec.in_shape resolved (see resolve_shapes); throws ShapeError
// if it is missing.
inline std::uint64_t layer_flops(const LayerSpec& s, std::uint32_t batch, Direction dir) {
  std::uint64_t B = batch;
  switch (s.kind) {
    case LayerKind::Dense: {
      std::uint64_t mac = 2ull * s.in_dim * s.out_dim * B;
      return dir == Direction::Forward ? mac : 2 * mac;
    }
    case LayerKind::Conv2D: {
      if (s.in_shape.size() != 3)
        throw ShapeError("layer " + layer_label(s) + ": in_shape unresolved");
      std::uint64_t oh = (s.in_shape[1] - s.kernel_h) / s.stride + 1;
      std::uint64_t ow = (s.in_shape[2] - s.kernel_w) / s.stride + 1;
      std::uint64_t fwd = 2ull * s.kernel_h * s.kernel_w * s.in_ch * s.out_ch * oh * ow * B;
      return dir == Direction::Forward ? fwd : 2 * fwd;
    }
    case LayerKind::Concat:
      return detail::elementwise_out_numel(s) * B;
    case LayerKind::ReLU:
    case LayerKind::MaxPool2D:
    case LayerKind::Flatten: {
      if (s.in_shape.empty())
        throw ShapeError("layer " + layer_label(s) + ": in_shape unresolved");
      return detail::elementwise_out_numel(s) * B;
    }
    case LayerKind::SoftmaxCrossEntropy:
      return 5ull * s.num_classes * B;
  }
  return 0;
}

inline std::uint64_t chain_flops(const std::vector<LayerSpec>& chain, std::uint32_t batch,
                                 Direction dir) {
  std::uint64_t total = 0;
  for (const auto& s : chain) total += layer_flops(s, batch, dir);
  return total;
}

inline std::uint64_t chain_flops_both(const std::vector<LayerSpec>& chain, std::uint32_t batch) {
  return chain_flops(chain, batch, Direction::Forward) +
         chain_flops(chain, batch, Direction::Backward);
}

}  // namespace splitnn
