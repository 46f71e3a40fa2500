// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "splitnn/layers.hpp"
#include "splitnn/rng.hpp"

using namespace splitnn;

TEST_CASE("dense forward is x*W + b") {
  LayerState st = {dense(2, 2), {}, {}, {}};
  st.weights.push_back(Tensor({2, 2}, {1, 2, 3, 4}));  // row-major [in,out]
  st.weights.push_back(Tensor({2}, {0.5f, -0.5f}));
  Tensor x({2, 2}, {1, 0, 0, 1});
  Tensor y = forward(st, x);
  REQUIRE(y.shape == Shape{2, 2});
  REQUIRE(y.at2(0, 0) == 1.5f);   // 1*1 + 0*3 + 0.5
  REQUIRE(y.at2(0, 1) == 1.5f);   // 1*2 + 0*4 - 0.5
  REQUIRE(y.at2(1, 0) == 3.5f);
  REQUIRE(y.at2(1, 1) == 3.5f);
}

TEST_CASE("dense backward applies the mean-gradient sgd step") {
  // One weight, one sample: w=2, x=3, upstream g=1, lr=0.1 -> w' = 2 - 0.1*3*1.
  LayerState st = {dense(1, 1, /*bias=*/false), {}, {}, {}};
  st.weights.push_back(Tensor({1, 1}, {2.0f}));
  Tensor x({1, 1}, {3.0f});
  forward(st, x);
  Tensor dx = backward(st, Tensor({1, 1}, {1.0f}), 0.1f);
  REQUIRE(st.weights[0].data[0] == Catch::Approx(1.7f));
  REQUIRE(dx.data[0] == Catch::Approx(2.0f));  // dL/dx = w * g with the old w
}

TEST_CASE("dense bias gradient is the column sum of upstream") {
  LayerState st = {dense(1, 2), {}, {}, {}};
  st.weights.push_back(Tensor({1, 2}, {0.0f, 0.0f}));
  st.weights.push_back(Tensor({2}, {0.0f, 0.0f}));
  Tensor x({3, 1}, {1, 1, 1});
  forward(st, x);
  Tensor g({3, 2}, {1, 2, 1, 2, 1, 2});
  backward(st, g, 1.0f);
  REQUIRE(st.weights[1].data[0] == Catch::Approx(-3.0f));
  REQUIRE(st.weights[1].data[1] == Catch::Approx(-6.0f));
}

TEST_CASE("relu zeroes negatives in both directions") {
  LayerState st = {relu(), {}, {}, {}};
  Tensor x({1, 4}, {-1.0f, 0.0f, 2.0f, -3.0f});
  Tensor y = forward(st, x);
  REQUIRE(y.data == std::vector<float>{0, 0, 2, 0});
  Tensor dx = backward(st, Tensor({1, 4}, {5, 5, 5, 5}), 0.1f);
  REQUIRE(dx.data == std::vector<float>{0, 0, 5, 0});  // gradient blocked at x<=0
}

TEST_CASE("conv2d forward on a hand-worked case") {
  // 1x1x3x3 input, 1->1 channels, 2x2 kernel of ones, zero bias.
  LayerState st = {conv2d(1, 1, 2, 2), {}, {}, {}};
  st.weights.push_back(Tensor({1, 1, 2, 2}, {1, 1, 1, 1}));
  st.weights.push_back(Tensor({1}, {0.0f}));
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor y = forward(st, x);
  REQUIRE(y.shape == Shape{1, 1, 2, 2});
  REQUIRE(y.data == std::vector<float>{12, 16, 24, 28});
}

TEST_CASE("conv2d respects stride and bias") {
  LayerState st = {conv2d(1, 2, 2, 2, /*stride=*/2), {}, {}, {}};
  st.weights.push_back(Tensor({2, 1, 2, 2}, {1, 0, 0, 0, 0, 0, 0, 1}));
  st.weights.push_back(Tensor({2}, {10.0f, 20.0f}));
  Tensor x({1, 1, 4, 4},
           {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
  Tensor y = forward(st, x);
  REQUIRE(y.shape == Shape{1, 2, 2, 2});
  // channel 0 takes top-left of each window + 10, channel 1 bottom-right + 20
  REQUIRE(y.data == std::vector<float>{11, 13, 19, 21, 26, 28, 34, 36});
}

TEST_CASE("maxpool forward and argmax routing backward") {
  LayerState st = {maxpool2d(2, 2), {}, {}, {}};
  Tensor x({1, 1, 2, 4}, {1, 5, 2, 2, 3, 4, 2, 6});
  Tensor y = forward(st, x);
  REQUIRE(y.shape == Shape{1, 1, 1, 2});
  REQUIRE(y.data == std::vector<float>{5, 6});
  Tensor dx = backward(st, Tensor({1, 1, 1, 2}, {7, 9}), 0.1f);
  REQUIRE(dx.data == std::vector<float>{0, 7, 0, 0, 0, 0, 0, 9});
}

TEST_CASE("flatten keeps values, changes shape, and inverts") {
  LayerState st = {flatten(), {}, {}, {}};
  Tensor x({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor y = forward(st, x);
  REQUIRE(y.shape == Shape{2, 4});
  REQUIRE(y.data == x.data);
  Tensor dx = backward(st, y, 0.1f);
  REQUIRE(dx.shape == x.shape);
  REQUIRE(dx.data == x.data);
}

TEST_CASE("concat joins along features and splits gradients back") {
  LayerState st = {concat({2, 1, 3}), {}, {}, {}};
  Tensor a({2, 2}, {1, 2, 7, 8});
  Tensor b({2, 1}, {3, 9});
  Tensor c({2, 3}, {4, 5, 6, 10, 11, 12});
  Tensor y = concat_forward(st, {a, b, c});
  REQUIRE(y.shape == Shape{2, 6});
  REQUIRE(y.data == std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  auto grads = concat_backward(st, y);
  REQUIRE(grads.size() == 3);
  REQUIRE(grads[0].data == a.data);
  REQUIRE(grads[1].data == b.data);
  REQUIRE(grads[2].data == c.data);
}

TEST_CASE("concat validates widths") {
  LayerState st = {concat({2, 2}), {}, {}, {}};
  Tensor a({1, 2}, {1, 2});
  Tensor b({1, 3}, {3, 4, 5});
  REQUIRE_THROWS_AS(concat_forward(st, {a, b}), ShapeError);
  REQUIRE_THROWS_AS(concat_forward(st, {a}), ShapeError);
}

TEST_CASE("softmax cross-entropy on uniform logits is log C") {
  LayerState st = {softmax_ce(4), {}, {}, {}};
  Tensor logits({2, 4}, std::vector<float>(8, 0.0f));
  std::vector<std::uint16_t> labels{1, 3};
  auto r = loss_forward_backward(st, logits, labels);
  REQUIRE(r.loss == Catch::Approx(std::log(4.0)).margin(1e-6));
  // each row of the gradient sums to zero and carries the 1/batch factor
  for (int b = 0; b < 2; ++b) {
    float row = 0;
    for (int c = 0; c < 4; ++c) row += r.logits_grad.at2(b, c);
    REQUIRE(row == Catch::Approx(0.0f).margin(1e-7));
  }
  REQUIRE(r.logits_grad.at2(0, 1) == Catch::Approx((0.25 - 1.0) / 2.0).margin(1e-6));
  REQUIRE(r.logits_grad.at2(0, 0) == Catch::Approx(0.25 / 2.0).margin(1e-6));
}

TEST_CASE("softmax cross-entropy is shift-invariant and batch-scaled") {
  LayerState st = {softmax_ce(3), {}, {}, {}};
  Tensor l1({1, 3}, {1.0f, 2.0f, 3.0f});
  Tensor l2({1, 3}, {101.0f, 102.0f, 103.0f});  // +100 shift, same softmax
  std::vector<std::uint16_t> y{2};
  auto r1 = loss_forward_backward(st, l1, y);
  auto r2 = loss_forward_backward(st, l2, y);
  REQUIRE(r1.loss == Catch::Approx(r2.loss).margin(1e-6));

  Tensor big({4, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
  std::vector<std::uint16_t> y4{2, 2, 2, 2};
  auto r4 = loss_forward_backward(st, big, y4);
  REQUIRE(r4.logits_grad.at2(0, 0) == Catch::Approx(r1.logits_grad.at2(0, 0) / 4).margin(1e-8));
}

TEST_CASE("loss rejects bad labels") {
  LayerState st = {softmax_ce(3), {}, {}, {}};
  Tensor logits({2, 3}, {0, 0, 0, 0, 0, 0});
  std::vector<std::uint16_t> wrong_count{1};
  REQUIRE_THROWS_AS(loss_forward_backward(st, logits, wrong_count), ShapeError);
  std::vector<std::uint16_t> out_of_range{1, 3};
  REQUIRE_THROWS_AS(loss_forward_backward(st, logits, out_of_range), ShapeError);
}

TEST_CASE("shape errors carry layer and shape context") {
  LayerState st = {dense(4, 2), {}, {}, {}};
  st.weights.push_back(Tensor::zeros({4, 2}));
  st.weights.push_back(Tensor::zeros({2}));
  Tensor bad({2, 3}, {1, 2, 3, 4, 5, 6});
  REQUIRE_THROWS_AS(forward(st, bad), ShapeError);
  try {
    forward(st, bad);
  } catch (const ShapeError& e) {
    REQUIRE(std::string(e.what()).find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("backward without forward is a protocol misuse") {
  LayerState st = {relu(), {}, {}, {}};
  REQUIRE_THROWS_AS(backward(st, Tensor({1, 1}, {1.0f}), 0.1f), ProtocolMisuse);
}

TEST_CASE("upstream gradient shape is validated") {
  LayerState st = {relu(), {}, {}, {}};
  forward(st, Tensor({1, 4}, {1, 2, 3, 4}));
  REQUIRE_THROWS_AS(backward(st, Tensor({1, 3}, {1, 2, 3}), 0.1f), ShapeError);
}

TEST_CASE("glorot init respects bounds and is seed-deterministic") {
  Rng a(123), b(123), c(124);
  LayerState s1 = init_layer(dense(64, 32), a);
  LayerState s2 = init_layer(dense(64, 32), b);
  LayerState s3 = init_layer(dense(64, 32), c);
  REQUIRE(s1.weights[0].data == s2.weights[0].data);
  REQUIRE(s1.weights[0].data != s3.weights[0].data);
  float bound = std::sqrt(6.0f / (64 + 32));
  for (float v : s1.weights[0].data) {
    REQUIRE(v >= -bound);
    REQUIRE(v <= bound);
  }
  for (float v : s1.weights[1].data) REQUIRE(v == 0.0f);

  Rng d(5);
  LayerState cv = init_layer(conv2d(3, 8, 3, 3), d);
  REQUIRE(cv.weights[0].shape == Shape{8, 3, 3, 3});
  float cb = std::sqrt(6.0f / (3 * 9 + 8 * 9));
  for (float v : cv.weights[0].data) {
    REQUIRE(v >= -cb);
    REQUIRE(v <= cb);
  }
}

TEST_CASE("resolve_shapes threads sample shapes through a cnn chain") {
  std::vector<LayerSpec> chain = {conv2d(1, 8, 3, 3), relu(), maxpool2d(2, 2), flatten(),
                                  dense(1352, 10)};
  Shape out = resolve_shapes(chain, {1, 28, 28});
  REQUIRE(out == Shape{10});
  REQUIRE(chain[1].in_shape == Shape{8, 26, 26});
  REQUIRE(chain[2].in_shape == Shape{8, 26, 26});
  REQUIRE(chain[3].in_shape == Shape{8, 13, 13});
  REQUIRE(chain[4].in_shape == Shape{1352});

  std::vector<LayerSpec> bad = {dense(5, 3)};
  REQUIRE_THROWS_AS(resolve_shapes(bad, {4}), ShapeError);
}

TEST_CASE("backward_collect gathers gradients without touching weights") {
  Rng r(77);
  LayerState live = init_layer(dense(3, 2), r);
  LayerState frozen = live;
  Tensor x({2, 3}, {0.1f, -0.2f, 0.3f, 0.4f, 0.5f, -0.6f});
  Tensor g({2, 2}, {0.3f, -0.1f, 0.2f, 0.5f});

  forward(live, x);
  backward(live, g, 0.25f);

  forward(frozen, x);
  std::vector<Tensor> sink;
  Tensor dx = backward_collect(frozen, g, sink);
  REQUIRE(sink.size() == 2);
  // frozen weights unchanged; applying the collected grads reproduces `live`
  for (std::size_t w = 0; w < 2; ++w)
    for (std::size_t i = 0; i < frozen.weights[w].data.size(); ++i) {
      float applied = frozen.weights[w].data[i] - 0.25f * sink[w].data[i];
      REQUIRE(applied == Catch::Approx(live.weights[w].data[i]).margin(1e-7));
    }
}

TEST_CASE("count_correct takes the argmax") {
  Tensor logits({3, 3}, {5, 1, 1, 0, 2, 9, 4, 8, 1});
  std::vector<std::uint16_t> y{0, 2, 0};
  REQUIRE(count_correct(logits, y) == 2);
}

TEST_CASE("param_count follows layer dimensions") {
  REQUIRE(param_count(dense(784, 64)) == 784 * 64 + 64);
  REQUIRE(param_count(dense(10, 5, false)) == 50);
  REQUIRE(param_count(conv2d(3, 8, 3, 3)) == 8 * 3 * 9 + 8);
  REQUIRE(param_count(relu()) == 0);
  REQUIRE(param_count(maxpool2d(2, 2)) == 0);
}
