// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal deterministic layer zoo: dense, relu, conv2d, maxpool2d, flatten,
// feature-axis concat and softmax cross-entropy, each with an explicit
// forward/backward pair and in-place SGD. No autodiff graph; segments of a
// split network execute these in sequence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitnn/rng.hpp"
#include "splitnn/tensor.hpp"

namespace splitnn {

enum class LayerKind : std::uint8_t {
  Dense,
  ReLU,
  Conv2D,
  MaxPool2D,
  Flatten,
  Concat,
  SoftmaxCrossEntropy,
};

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Concat: return "concat";
    case LayerKind::SoftmaxCrossEntropy: return "softmax_ce";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::string name;

  // Dense
  std::uint32_t in_dim = 0, out_dim = 0;
  bool has_bias = true;
  // Conv2D
  std::uint32_t in_ch = 0, out_ch = 0, kernel_h = 0, kernel_w = 0, stride = 1;
  // MaxPool2D
  std::uint32_t window = 0;
  // Concat: per-input feature widths along axis 1
  std::vector<std::uint32_t> input_widths;
  // SoftmaxCrossEntropy
  std::uint32_t num_classes = 0;

  // Per-sample input shape, filled by resolve_shapes(); required before
  // flops() on element-count-priced layers and conv.
  Shape in_shape;

  bool operator==(const LayerSpec& o) const {
    return kind == o.kind && name == o.name && in_dim == o.in_dim && out_dim == o.out_dim &&
           has_bias == o.has_bias && in_ch == o.in_ch && out_ch == o.out_ch &&
           kernel_h == o.kernel_h && kernel_w == o.kernel_w && stride == o.stride &&
           window == o.window && input_widths == o.input_widths &&
           num_classes == o.num_classes;
  }
};

inline LayerSpec dense(std::uint32_t in, std::uint32_t out, bool bias = true,
                       std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.in_dim = in;
  s.out_dim = out;
  s.has_bias = bias;
  s.name = std::move(name);
  return s;
}

inline LayerSpec relu(std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::ReLU;
  s.name = std::move(name);
  return s;
}

inline LayerSpec conv2d(std::uint32_t in_ch, std::uint32_t out_ch, std::uint32_t kh,
                        std::uint32_t kw, std::uint32_t stride = 1, std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride = stride;
  s.name = std::move(name);
  return s;
}

inline LayerSpec maxpool2d(std::uint32_t window, std::uint32_t stride, std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2D;
  s.window = window;
  s.stride = stride;
  s.name = std::move(name);
  return s;
}

inline LayerSpec flatten(std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.name = std::move(name);
  return s;
}

inline LayerSpec concat(std::vector<std::uint32_t> widths, std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::Concat;
  s.input_widths = std::move(widths);
  s.name = std::move(name);
  return s;
}

inline std::uint32_t concat_total_width(const LayerSpec& s) {
  std::uint32_t w = 0;
  for (auto v : s.input_widths) w += v;
  return w;
}

inline LayerSpec softmax_ce(std::uint32_t num_classes, std::string name = "") {
  LayerSpec s;
  s.kind = LayerKind::SoftmaxCrossEntropy;
  s.num_classes = num_classes;
  s.name = std::move(name);
  return s;
}

inline std::string layer_label(const LayerSpec& s) {
  return s.name.empty() ? std::string(kind_name(s.kind)) : s.name;
}

// ---- shape propagation ----

// Output shape for a batched input [B, ...in]. Throws ShapeError naming the
// layer and both shapes on any incompatibility.
inline Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  auto fail = [&](const std::string& why) -> Shape {
    throw ShapeError("layer " + layer_label(spec) + ": " + why + " (input " + shape_str(in) +
                     ")");
  };
  switch (spec.kind) {
    case LayerKind::Dense: {
      if (in.size() != 2 || in[1] != spec.in_dim)
        fail("expects [batch," + std::to_string(spec.in_dim) + "]");
      return {in[0], spec.out_dim};
    }
    case LayerKind::ReLU:
      return in;
    case LayerKind::Conv2D: {
      if (in.size() != 4 || in[1] != spec.in_ch) fail("expects [batch,C,H,W] with C=" +
                                                      std::to_string(spec.in_ch));
      if (in[2] < spec.kernel_h || in[3] < spec.kernel_w) fail("kernel larger than input");
      std::uint32_t oh = (in[2] - spec.kernel_h) / spec.stride + 1;
      std::uint32_t ow = (in[3] - spec.kernel_w) / spec.stride + 1;
      return {in[0], spec.out_ch, oh, ow};
    }
    case LayerKind::MaxPool2D: {
      if (in.size() != 4) fail("expects [batch,C,H,W]");
      if (in[2] < spec.window || in[3] < spec.window) fail("window larger than input");
      std::uint32_t oh = (in[2] - spec.window) / spec.stride + 1;
      std::uint32_t ow = (in[3] - spec.window) / spec.stride + 1;
      return {in[0], in[1], oh, ow};
    }
    case LayerKind::Flatten: {
      if (in.size() < 2) fail("expects batched input");
      std::uint32_t f = 1;
      for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
      return {in[0], f};
    }
    case LayerKind::Concat:
      fail("concat takes multiple inputs; use concat_output_shape");
      return {};
    case LayerKind::SoftmaxCrossEntropy: {
      if (in.size() != 2 || in[1] != spec.num_classes)
        fail("expects [batch," + std::to_string(spec.num_classes) + "] logits");
      return in;
    }
  }
  return {};
}

inline Shape concat_output_shape(const LayerSpec& spec, const std::vector<Shape>& ins) {
  if (ins.size() != spec.input_widths.size())
    throw ShapeError("layer " + layer_label(spec) + ": arity " +
                     std::to_string(spec.input_widths.size()) + " but got " +
                     std::to_string(ins.size()) + " inputs");
  std::uint32_t feat = 0;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const auto& s = ins[i];
    if (s.size() != 2 || s[0] != ins[0][0] || s[1] != spec.input_widths[i])
      throw ShapeError("layer " + layer_label(spec) + ": input " + std::to_string(i) +
                       " must be [batch," + std::to_string(spec.input_widths[i]) + "], got " +
                       shape_str(s));
    feat += s[1];
  }
  return {ins[0][0], feat};
}

// Fills spec.in_shape along a chain; input is the per-sample shape (no batch).
// A concat inside a chain stands for already-joined inputs, so its sample
// width must equal the sum of its declared input widths. Returns the
// per-sample output shape of the last layer.
inline Shape resolve_shapes(std::vector<LayerSpec>& chain, Shape sample_shape) {
  Shape cur = std::move(sample_shape);
  for (auto& spec : chain) {
    spec.in_shape = cur;
    if (spec.kind == LayerKind::Concat) {
      std::uint32_t total = concat_total_width(spec);
      if (cur.size() != 1 || cur[0] != total)
        throw ShapeError("layer " + layer_label(spec) + ": chain input " + shape_str(cur) +
                         " vs joined width " + std::to_string(total));
      continue;
    }
    Shape batched;
    batched.push_back(1);
    for (auto d : cur) batched.push_back(d);
    Shape out = layer_output_shape(spec, batched);
    cur.assign(out.begin() + 1, out.end());
  }
  return cur;
}

// ---- layer state ----

struct LayerState {
  LayerSpec spec;
  std::vector<Tensor> weights;               // dense: W [in,out] (+ bias [out]); conv: K (+ bias)
  std::optional<Tensor> cached_input;        // set by forward, cleared by backward
  std::vector<Tensor> cached_inputs;         // concat only

  bool has_cache() const { return cached_input.has_value() || !cached_inputs.empty(); }
  void clear_cache() {
    cached_input.reset();
    cached_inputs.clear();
  }
};

// Glorot-uniform weights, zero biases, one deterministic stream.
inline LayerState init_layer(const LayerSpec& spec, Rng& rng) {
  LayerState st;
  st.spec = spec;
  auto glorot = [&rng](Shape shape, std::uint32_t fan_in, std::uint32_t fan_out) {
    float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };
  switch (spec.kind) {
    case LayerKind::Dense:
      st.weights.push_back(glorot({spec.in_dim, spec.out_dim}, spec.in_dim, spec.out_dim));
      if (spec.has_bias) st.weights.push_back(Tensor::zeros({spec.out_dim}));
      break;
    case LayerKind::Conv2D: {
      std::uint32_t rf = spec.kernel_h * spec.kernel_w;
      st.weights.push_back(glorot({spec.out_ch, spec.in_ch, spec.kernel_h, spec.kernel_w},
                                  spec.in_ch * rf, spec.out_ch * rf));
      st.weights.push_back(Tensor::zeros({spec.out_ch}));
      break;
    }
    default:
      break;
  }
  return st;
}

inline std::vector<LayerState> init_chain(const std::vector<LayerSpec>& chain, Rng& rng) {
  std::vector<LayerState> out;
  out.reserve(chain.size());
  for (const auto& s : chain) out.push_back(init_layer(s, rng));
  return out;
}

// ---- forward ----

namespace detail {

inline Tensor dense_forward(const LayerState& st, const Tensor& x) {
  const auto& spec = st.spec;
  std::uint32_t B = x.dim(0);
  const Tensor& W = st.weights[0];
  Tensor y = Tensor::zeros({B, spec.out_dim});
  for (std::uint32_t b = 0; b < B; ++b)
    for (std::uint32_t o = 0; o < spec.out_dim; ++o) {
      float acc = spec.has_bias ? st.weights[1].data[o] : 0.0f;
      for (std::uint32_t i = 0; i < spec.in_dim; ++i)
        acc += x.at2(b, i) * W.at2(i, o);
      y.at2(b, o) = acc;
    }
  return y;
}

inline Tensor conv_forward(const LayerState& st, const Tensor& x) {
  const auto& s = st.spec;
  Shape os = layer_output_shape(s, x.shape);
  std::uint32_t B = os[0], OH = os[2], OW = os[3], H = x.dim(2), W = x.dim(3);
  const Tensor& K = st.weights[0];
  const Tensor& bias = st.weights[1];
  Tensor y = Tensor::zeros(os);
  for (std::uint32_t b = 0; b < B; ++b)
    for (std::uint32_t oc = 0; oc < s.out_ch; ++oc)
      for (std::uint32_t i = 0; i < OH; ++i)
        for (std::uint32_t j = 0; j < OW; ++j) {
          float acc = bias.data[oc];
          for (std::uint32_t ic = 0; ic < s.in_ch; ++ic)
            for (std::uint32_t u = 0; u < s.kernel_h; ++u)
              for (std::uint32_t v = 0; v < s.kernel_w; ++v) {
                std::size_t xi = ((static_cast<std::size_t>(b) * s.in_ch + ic) * H +
                                  (i * s.stride + u)) * W + (j * s.stride + v);
                std::size_t ki = ((static_cast<std::size_t>(oc) * s.in_ch + ic) * s.kernel_h + u) *
                                     s.kernel_w + v;
                acc += x.data[xi] * K.data[ki];
              }
          y.data[((static_cast<std::size_t>(b) * s.out_ch + oc) * OH + i) * OW + j] = acc;
        }
  return y;
}

inline Tensor maxpool_forward(const LayerState& st, const Tensor& x) {
  const auto& s = st.spec;
  Shape os = layer_output_shape(s, x.shape);
  std::uint32_t B = os[0], C = os[1], OH = os[2], OW = os[3], H = x.dim(2), W = x.dim(3);
  Tensor y = Tensor::zeros(os);
  for (std::uint32_t b = 0; b < B; ++b)
    for (std::uint32_t c = 0; c < C; ++c)
      for (std::uint32_t i = 0; i < OH; ++i)
        for (std::uint32_t j = 0; j < OW; ++j) {
          float best = -3.4e38f;
          for (std::uint32_t u = 0; u < s.window; ++u)
            for (std::uint32_t v = 0; v < s.window; ++v) {
              std::size_t xi = ((static_cast<std::size_t>(b) * C + c) * H + (i * s.stride + u)) *
                                   W + (j * s.stride + v);
              best = std::max(best, x.data[xi]);
            }
          y.data[((static_cast<std::size_t>(b) * C + c) * OH + i) * OW + j] = best;
        }
  return y;
}

}  // namespace detail

// Single-input forward. Caches the input for backward when `train` is set.
inline Tensor forward(LayerState& st, const Tensor& input, bool train = true) {
  const auto& spec = st.spec;
  if (spec.kind == LayerKind::Concat)
    throw ShapeError("layer " + layer_label(spec) + ": concat requires concat_forward");
  Shape os = layer_output_shape(spec, input.shape);  // validates
  Tensor out;
  switch (spec.kind) {
    case LayerKind::Dense:
      out = detail::dense_forward(st, input);
      break;
    case LayerKind::ReLU: {
      out = input;
      for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
      break;
    }
    case LayerKind::Conv2D:
      out = detail::conv_forward(st, input);
      break;
    case LayerKind::MaxPool2D:
      out = detail::maxpool_forward(st, input);
      break;
    case LayerKind::Flatten:
      out = Tensor(os, input.data);
      break;
    case LayerKind::SoftmaxCrossEntropy:
      throw ShapeError("layer " + layer_label(spec) + ": use loss_forward_backward");
    default:
      break;
  }
  if (train) st.cached_input = input;
  check_finite(out, "forward of " + layer_label(spec));
  return out;
}

inline Tensor concat_forward(LayerState& st, const std::vector<Tensor>& inputs,
                             bool train = true) {
  const auto& spec = st.spec;
  if (spec.kind != LayerKind::Concat)
    throw ShapeError("layer " + layer_label(spec) + ": not a concat layer");
  std::vector<Shape> shapes;
  for (const auto& t : inputs) shapes.push_back(t.shape);
  Shape os = concat_output_shape(spec, shapes);
  std::uint32_t B = os[0];
  Tensor out = Tensor::zeros(os);
  for (std::uint32_t b = 0; b < B; ++b) {
    std::size_t off = 0;
    for (const auto& t : inputs) {
      std::uint32_t w = t.dim(1);
      std::copy_n(t.data.begin() + static_cast<std::size_t>(b) * w, w,
                  out.data.begin() + static_cast<std::size_t>(b) * os[1] + off);
      off += w;
    }
  }
  if (train) st.cached_inputs = inputs;
  check_finite(out, "forward of " + layer_label(spec));
  return out;
}

// ---- backward ----

namespace detail {

// Computes input gradient; either applies the SGD step in place (sink == nullptr)
// or appends the parameter gradients to *sink and leaves weights untouched.
inline Tensor backward_impl(LayerState& st, const Tensor& g, float lr,
                            std::vector<Tensor>* sink) {
  const auto& spec = st.spec;
  if (!st.cached_input.has_value())
    throw ProtocolMisuse("backward on " + layer_label(spec) + " without prior forward");
  const Tensor& x = *st.cached_input;
  Shape expect = layer_output_shape(spec, x.shape);
  if (g.shape != expect)
    throw ShapeError("layer " + layer_label(spec) + ": upstream gradient " +
                     shape_str(g.shape) + " does not match output " + shape_str(expect));
  Tensor dx;
  switch (spec.kind) {
    case LayerKind::Dense: {
      std::uint32_t B = x.dim(0);
      Tensor& W = st.weights[0];
      Tensor dW = Tensor::zeros(W.shape);
      dx = Tensor::zeros(x.shape);
      for (std::uint32_t b = 0; b < B; ++b)
        for (std::uint32_t o = 0; o < spec.out_dim; ++o) {
          float gv = g.at2(b, o);
          for (std::uint32_t i = 0; i < spec.in_dim; ++i) {
            dW.at2(i, o) += x.at2(b, i) * gv;
            dx.at2(b, i) += W.at2(i, o) * gv;
          }
        }
      if (spec.has_bias) {
        Tensor db = Tensor::zeros({spec.out_dim});
        for (std::uint32_t b = 0; b < B; ++b)
          for (std::uint32_t o = 0; o < spec.out_dim; ++o) db.data[o] += g.at2(b, o);
        if (sink) {
          sink->push_back(std::move(dW));
          sink->push_back(std::move(db));
        } else {
          for (std::size_t i = 0; i < W.data.size(); ++i) W.data[i] -= lr * dW.data[i];
          for (std::size_t i = 0; i < db.data.size(); ++i)
            st.weights[1].data[i] -= lr * db.data[i];
        }
      } else if (sink) {
        sink->push_back(std::move(dW));
      } else {
        for (std::size_t i = 0; i < W.data.size(); ++i) W.data[i] -= lr * dW.data[i];
      }
      break;
    }
    case LayerKind::ReLU: {
      dx = g;
      for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (x.data[i] <= 0.0f) dx.data[i] = 0.0f;
      break;
    }
    case LayerKind::Conv2D: {
      const auto& s = spec;
      std::uint32_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
      std::uint32_t OH = expect[2], OW = expect[3];
      Tensor& K = st.weights[0];
      Tensor dK = Tensor::zeros(K.shape);
      Tensor db = Tensor::zeros({s.out_ch});
      dx = Tensor::zeros(x.shape);
      for (std::uint32_t b = 0; b < B; ++b)
        for (std::uint32_t oc = 0; oc < s.out_ch; ++oc)
          for (std::uint32_t i = 0; i < OH; ++i)
            for (std::uint32_t j = 0; j < OW; ++j) {
              float gv = g.data[((static_cast<std::size_t>(b) * s.out_ch + oc) * OH + i) * OW + j];
              db.data[oc] += gv;
              for (std::uint32_t ic = 0; ic < s.in_ch; ++ic)
                for (std::uint32_t u = 0; u < s.kernel_h; ++u)
                  for (std::uint32_t v = 0; v < s.kernel_w; ++v) {
                    std::size_t xi = ((static_cast<std::size_t>(b) * s.in_ch + ic) * H +
                                      (i * s.stride + u)) * W + (j * s.stride + v);
                    std::size_t ki = ((static_cast<std::size_t>(oc) * s.in_ch + ic) * s.kernel_h +
                                      u) * s.kernel_w + v;
                    dK.data[ki] += x.data[xi] * gv;
                    dx.data[xi] += K.data[ki] * gv;
                  }
            }
      if (sink) {
        sink->push_back(std::move(dK));
        sink->push_back(std::move(db));
      } else {
        for (std::size_t i = 0; i < K.data.size(); ++i) K.data[i] -= lr * dK.data[i];
        for (std::size_t i = 0; i < db.data.size(); ++i)
          st.weights[1].data[i] -= lr * db.data[i];
      }
      break;
    }
    case LayerKind::MaxPool2D: {
      const auto& s = spec;
      std::uint32_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
      std::uint32_t OH = expect[2], OW = expect[3];
      dx = Tensor::zeros(x.shape);
      for (std::uint32_t b = 0; b < B; ++b)
        for (std::uint32_t c = 0; c < C; ++c)
          for (std::uint32_t i = 0; i < OH; ++i)
            for (std::uint32_t j = 0; j < OW; ++j) {
              std::size_t besti = 0;
              float best = -3.4e38f;
              for (std::uint32_t u = 0; u < s.window; ++u)
                for (std::uint32_t v = 0; v < s.window; ++v) {
                  std::size_t xi = ((static_cast<std::size_t>(b) * C + c) * H +
                                    (i * s.stride + u)) * W + (j * s.stride + v);
                  if (x.data[xi] > best) {
                    best = x.data[xi];
                    besti = xi;
                  }
                }
              dx.data[besti] +=
                  g.data[((static_cast<std::size_t>(b) * C + c) * OH + i) * OW + j];
            }
      break;
    }
    case LayerKind::Flatten:
      dx = Tensor(x.shape, g.data);
      break;
    default:
      throw ProtocolMisuse("backward not defined for " + layer_label(spec));
  }
  st.clear_cache();
  check_finite(dx, "backward of " + layer_label(spec));
  return dx;
}

}  // namespace detail

// Backward with in-place SGD update (w <- w - lr * dw). The upstream gradient
// is expected to carry the loss's 1/batch factor, so the applied step is the
// batch-mean gradient.
inline Tensor backward(LayerState& st, const Tensor& upstream_grad, float lr) {
  return detail::backward_impl(st, upstream_grad, lr, nullptr);
}

// Backward that appends parameter gradients to `sink` (weight order) and does
// not touch the weights. Used by the gradient-aggregating baseline.
inline Tensor backward_collect(LayerState& st, const Tensor& upstream_grad,
                               std::vector<Tensor>& sink) {
  return detail::backward_impl(st, upstream_grad, 0.0f, &sink);
}

// Splits the upstream gradient back into per-input pieces.
inline std::vector<Tensor> concat_backward(LayerState& st, const Tensor& upstream_grad) {
  const auto& spec = st.spec;
  if (spec.kind != LayerKind::Concat)
    throw ShapeError("layer " + layer_label(spec) + ": not a concat layer");
  if (st.cached_inputs.empty())
    throw ProtocolMisuse("backward on " + layer_label(spec) + " without prior forward");
  std::vector<Shape> shapes;
  for (const auto& t : st.cached_inputs) shapes.push_back(t.shape);
  Shape expect = concat_output_shape(spec, shapes);
  if (upstream_grad.shape != expect)
    throw ShapeError("layer " + layer_label(spec) + ": upstream gradient " +
                     shape_str(upstream_grad.shape) + " does not match output " +
                     shape_str(expect));
  std::vector<Tensor> grads;
  std::uint32_t B = expect[0];
  std::size_t off = 0;
  for (const auto& t : st.cached_inputs) {
    std::uint32_t w = t.dim(1);
    Tensor gi = Tensor::zeros(t.shape);
    for (std::uint32_t b = 0; b < B; ++b)
      std::copy_n(upstream_grad.data.begin() + static_cast<std::size_t>(b) * expect[1] + off, w,
                  gi.data.begin() + static_cast<std::size_t>(b) * w);
    grads.push_back(std::move(gi));
    off += w;
  }
  st.clear_cache();
  return grads;
}

// ---- loss ----

struct LossResult {
  double loss = 0.0;        // mean cross-entropy over the batch
  Tensor logits_grad;       // (softmax - onehot) / batch
};

// Softmax cross-entropy with mean reduction; the returned gradient already
// carries the 1/batch factor. Row max is subtracted before exponentiation.
inline LossResult loss_forward_backward(LayerState& st, const Tensor& logits,
                                        std::span<const std::uint16_t> labels) {
  const auto& spec = st.spec;
  if (spec.kind != LayerKind::SoftmaxCrossEntropy)
    throw ShapeError("layer " + layer_label(spec) + ": not a loss layer");
  layer_output_shape(spec, logits.shape);  // validates [B, C]
  std::uint32_t B = logits.dim(0), C = spec.num_classes;
  if (labels.size() != B)
    throw ShapeError("layer " + layer_label(spec) + ": " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(B));
  for (auto y : labels)
    if (y >= C)
      throw ShapeError("layer " + layer_label(spec) + ": label " + std::to_string(y) +
                       " out of range [0," + std::to_string(C) + ")");
  LossResult r;
  r.logits_grad = Tensor::zeros(logits.shape);
  double total = 0.0;
  for (std::uint32_t b = 0; b < B; ++b) {
    double rowmax = logits.at2(b, 0);
    for (std::uint32_t c = 1; c < C; ++c) rowmax = std::max<double>(rowmax, logits.at2(b, c));
    double denom = 0.0;
    for (std::uint32_t c = 0; c < C; ++c) denom += std::exp(logits.at2(b, c) - rowmax);
    total += std::log(denom) - (logits.at2(b, labels[b]) - rowmax);
    for (std::uint32_t c = 0; c < C; ++c) {
      double p = std::exp(logits.at2(b, c) - rowmax) / denom;
      double onehot = (c == labels[b]) ? 1.0 : 0.0;
      r.logits_grad.at2(b, c) = static_cast<float>((p - onehot) / B);
    }
  }
  r.loss = total / B;
  check_finite(r.logits_grad, "loss of " + layer_label(spec));
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
  return r;
}

inline std::uint32_t count_correct(const Tensor& logits, std::span<const std::uint16_t> labels) {
  std::uint32_t B = logits.dim(0), C = logits.dim(1), correct = 0;
  for (std::uint32_t b = 0; b < B; ++b) {
    std::uint32_t arg = 0;
    for (std::uint32_t c = 1; c < C; ++c)
      if (logits.at2(b, c) > logits.at2(b, arg)) arg = c;
    if (b < labels.size() && arg == labels[b]) ++correct;
  }
  return correct;
}

inline std::size_t param_count(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Dense:
      return static_cast<std::size_t>(s.in_dim) * s.out_dim + (s.has_bias ? s.out_dim : 0);
    case LayerKind::Conv2D:
      return static_cast<std::size_t>(s.out_ch) * s.in_ch * s.kernel_h * s.kernel_w + s.out_ch;
    default:
      return 0;
  }
}

}  // namespace splitnn
