// Copyright 2026 The hpo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "hpo/nnet.hpp"

using namespace hpo;
using namespace hpo::nnet;

namespace {

ParamPoint point_with(const ParamSpace& s, std::initializer_list<std::pair<const char*, int>> raw) {
  auto p = baseline_point();
  for (const auto& [name, v] : raw) p.values[s.index_of(name)] = v;
  return p;
}

// Class 0 is bright in the top half, class 1 in the bottom half.
struct TwoClassTask {
  std::vector<Image> images;
  std::vector<int> labels;
  LabeledImages train, val;
};

TwoClassTask two_class_task(int n_train, int n_val, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.3f);
  TwoClassTask t;
  const int n = n_train + n_val;
  t.images.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Image im(8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) im(r, c) = noise(rng) + (((r < 4) == (label == 0)) ? 0.6f : 0.0f);
    t.images.push_back(im);
    t.labels.push_back(label);
  }
  for (int i = 0; i < n; ++i) {
    auto& set = i < n_train ? t.train : t.val;
    set.images.push_back(&t.images[static_cast<std::size_t>(i)]);
    set.labels.push_back(t.labels[static_cast<std::size_t>(i)]);
  }
  return t;
}

NetSpec two_class_spec() {
  NetSpec s;
  s.input_side = 8;
  s.blocks = 1;
  s.filters = 4;
  s.fc_widths = {16, 8};
  s.num_classes = 2;
  return s;
}

Image random_image(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image im(side, side);
  for (Eigen::Index i = 0; i < im.size(); ++i) im.data()[i] = u(rng);
  return im;
}

}  // namespace

TEST_CASE("build: baseline at the paper preset") {
  const auto s = default_space();
  const auto spec = build(s, baseline_point(), Preset::Paper);
  CHECK(spec.input_side == 64);
  CHECK(spec.blocks == 5);
  CHECK(spec.convs_per_block == 1);
  CHECK(spec.filters == 64);
  CHECK(spec.filter_size == 3);
  CHECK(spec.fc_widths == std::vector<int>{4096, 1024});
  CHECK(spec.final_side() == 2);
}

TEST_CASE("build: collapse and cap are distinct errors") {
  const auto s = default_space();
  CHECK_THROWS_AS(build(s, baseline_point(), Preset::Desk), SpatialCollapseError);
  // 4 blocks of 7 convs with 128 5x5 filters: well above 2e6 weights
  const auto big = point_with(s, {{"b", 4}, {"c", 7}, {"r", 7}, {"s", 5}});
  CHECK_THROWS_AS(build(s, big, Preset::Desk), ParameterCapError);
  CHECK_NOTHROW(build(s, big, Preset::Paper));
  CHECK_THROWS_AS(build(s, point_with(s, {{"b", 1}}), Preset::Desk, 10), ParameterCapError);
}

TEST_CASE("build: smallest conv layer has 40 parameters") {
  const auto s = default_space();
  const auto spec = build(s, point_with(s, {{"b", 1}, {"c", 1}, {"r", 2}, {"s", 3}}), Preset::Desk);
  Network<float> net(spec);
  CHECK(net.params().weights[0].size() + net.params().biases[0].size() == 40);
  // closed form: conv 40, fc 4*8*8 -> 128, 128 -> 64, 64 -> 4
  const std::uint64_t expect = 40 + (256 * 128 + 128) + (128 * 64 + 64) + (64 * 4 + 4);
  CHECK(spec.parameter_count() == expect);
  CHECK(enumerate_parameters(net) == expect);
}

TEST_CASE("parameter count closed form equals enumeration on random points") {
  const auto s = default_space();
  std::mt19937_64 rng(11);
  int checked = 0;
  while (checked < 50) {
    const auto p = sample_uniform(s, rng);
    NetSpec spec;
    try {
      spec = build(s, p, Preset::Desk);
    } catch (const std::invalid_argument&) {
      continue;
    }
    Network<float> net(spec);
    CHECK(spec.parameter_count() == enumerate_parameters(net));
    ++checked;
  }
}

TEST_CASE("hyper-parameters of the baseline") {
  const auto hp = hyper_params(default_space(), baseline_point());
  CHECK(hp.learning_rate == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(hp.batch_size == 8);
  CHECK(hp.epochs == 70);
  CHECK(hp.augment);
  const auto tp = train_params(hp, 5);
  CHECK(tp.momentum == 0.9);
  CHECK(tp.decay == 1e-6);
  CHECK(tp.seed == 5);
  TrainParams bad = tp;
  bad.epochs = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("weighted cross-entropy") {
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 3, 0.25);
  const std::vector<int> labels{0, 1, 3};
  const std::vector<double> ones(4, 1.0);
  CHECK(weighted_cross_entropy(uniform, labels, ones) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(4, 3);
  onehot(0, 0) = onehot(1, 1) = onehot(3, 2) = 1;
  CHECK(weighted_cross_entropy(onehot, labels, ones) <= 1e-10);

  Eigen::MatrixXd two(2, 2);
  two << 0.7, 0.2, 0.3, 0.8;
  const std::vector<int> l2{0, 1};
  const std::vector<double> w2{1.5, 0.75};
  // (1.5 * -ln 0.7 + 0.75 * -ln 0.8) / 2
  CHECK(weighted_cross_entropy(two, l2, w2) == doctest::Approx(0.351185040).epsilon(1e-8));

  // zero probability is clamped at 1e-12
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 1);
  zero(1, 0) = 1;
  CHECK(weighted_cross_entropy(zero, std::vector<int>{0}, w2) == doctest::Approx(1.5 * -std::log(1e-12)));

  CHECK_THROWS(weighted_cross_entropy(Eigen::MatrixXd(4, 0), std::vector<int>{}, ones));
}

TEST_CASE("softmax is stable for large logits") {
  Eigen::MatrixXd z(4, 3);
  z << 1e4, -1e4, 0, -1e4, 1e4, 0, 0, 0, 1e4, 5e3, -5e3, 1e4;
  const auto p = softmax(z);
  CHECK(p.allFinite());
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(p.col(j).sum() - 1) < 1e-12);
  CHECK(p(0, 0) == 1.0);
  CHECK(p(2, 2) == doctest::Approx(0.5));
  const double ce = weighted_cross_entropy(p, std::vector<int>{1, 0, 0}, std::vector<double>(4, 1.0));
  CHECK(std::isfinite(ce));
}

TEST_CASE("gradient matches central differences") {
  CHECK(gradcheck::tiny_spec().parameter_count() <= 500);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = gradcheck::run(seed);
    CHECK(r.fraction() >= 0.99);
  }
}

TEST_CASE("plain SGD step is w - lr * g") {
  std::mt19937_64 rng(1);
  Network<double> net(gradcheck::tiny_spec());
  net.initialize(rng);
  auto grad = net.params().zeros_like();
  const Eigen::VectorXd g = Eigen::VectorXd::Random(static_cast<Eigen::Index>(grad.size()));
  grad.assign(g);
  auto velocity = net.params().zeros_like();
  const Eigen::VectorXd before = net.params().flatten();
  sgd_step<double>(net.params(), velocity, grad, 0.01, 0.0);
  CHECK((net.params().flatten() - (before - 0.01 * g)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Nesterov step matches the Keras update by hand") {
  Parameters<double> p, v, g;
  p.weights = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  p.biases = {Eigen::VectorXd::Constant(1, 0.0)};
  v = p.zeros_like();
  g = p.zeros_like();
  g.weights[0](0, 0) = 2.0;
  sgd_step<double>(p, v, g, 0.1, 0.9);
  // v = -0.2, w = 1 + 0.9 * -0.2 - 0.2
  CHECK(v.weights[0](0, 0) == doctest::Approx(-0.2));
  CHECK(p.weights[0](0, 0) == doctest::Approx(0.62));
  sgd_step<double>(p, v, g, 0.1, 0.9);
  // v = -0.38, w = 0.62 + 0.9 * -0.38 - 0.2
  CHECK(p.weights[0](0, 0) == doctest::Approx(0.078));
}

TEST_CASE("predict_proba: valid, uniform on a zero last layer, deterministic") {
  std::mt19937_64 rng(2);
  const auto spec = build(default_space(), point_with(default_space(), {{"b", 2}}), Preset::Desk);
  Network<float> net(spec);
  net.initialize(rng);
  for (int i = 0; i < 20; ++i) {
    const auto p = net.predict_proba(random_image(16, rng));
    CHECK((p.array() >= 0).all());
    CHECK(std::abs(p.sum() - 1.0f) < 1e-6);
  }
  const auto im = random_image(16, rng);
  const auto a = net.predict_proba(im);
  const auto b = net.predict_proba(Image(im));
  CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * 4) == 0);
  CHECK_THROWS_AS(net.predict_proba(random_image(8, rng)), std::invalid_argument);

  net.params().weights.back().setZero();
  net.params().biases.back().setZero();
  const auto u = net.predict_proba(im);
  for (int k = 0; k < 4; ++k) CHECK(u(k) == 0.25f);
}

TEST_CASE("train separates a linearly separable task") {
  auto task = two_class_task(60, 40, 3);
  TrainParams tp;
  tp.learning_rate = 0.01;
  tp.epochs = 20;
  tp.seed = 9;
  const std::vector<double> w{1.0, 1.0};
  const auto net = train(two_class_spec(), task.train, task.val, w, tp);
  CHECK_FALSE(net.metrics.diverged);
  CHECK(net.metrics.val_error < 0.05);
  CHECK(net.metrics.steps == 20u * 8u);

  // same seed, same weights
  const auto again = train(two_class_spec(), task.train, task.val, w, tp);
  CHECK(again.net.params().flatten() == net.net.params().flatten());
}

TEST_CASE("learning rate 1 degenerates") {
  auto task = two_class_task(60, 40, 3);
  TrainParams tp;
  tp.learning_rate = 1.0;
  tp.epochs = 20;
  tp.seed = 9;
  const auto net = train(two_class_spec(), task.train, task.val, std::vector<double>{1.0, 1.0}, tp);
  CHECK((net.metrics.diverged || net.metrics.val_error >= 0.35));
}

TEST_CASE("first-epoch training loss is mostly nonincreasing at lr 1e-3") {
  auto task = two_class_task(64, 0, 4);
  std::mt19937_64 rng(5);
  Network<float> net(two_class_spec());
  net.initialize(rng);
  auto grad = net.params().zeros_like();
  auto velocity = net.params().zeros_like();
  const std::vector<double> w{1.0, 1.0};
  double prev = net.loss(task.train.images, task.train.labels, w);
  int steps = 0, nonincreasing = 0;
  for (std::size_t start = 0; start < task.train.size(); start += 8) {
    net.loss_and_gradient(std::span(task.train.images).subspan(start, 8),
                          std::span<const int>(task.train.labels).subspan(start, 8), w, grad);
    sgd_step<float>(net.params(), velocity, grad, 1e-3f, 0.9f);
    const double now = net.loss(task.train.images, task.train.labels, w);
    nonincreasing += now <= prev;
    ++steps;
    prev = now;
  }
  CHECK(nonincreasing >= 0.9 * steps);
}

TEST_CASE("divergence is flagged on non-finite loss") {
  auto task = two_class_task(16, 8, 6);
  task.images[0](0, 0) = std::numeric_limits<float>::infinity();
  TrainParams tp;
  tp.epochs = 1;
  const auto net = train(two_class_spec(), task.train, task.val, std::vector<double>{1.0, 1.0}, tp);
  CHECK(net.metrics.diverged);
}

TEST_CASE("augment: identity, range, noise level") {
  std::mt19937_64 rng(7);
  const auto im = random_image(16, rng);
  const AugmentParams neutral;
  CHECK((apply_augment(im, neutral, rng) - im).cwiseAbs().maxCoeff() <= 1e-6f);

  for (int i = 0; i < 50; ++i) {
    Image wild = random_image(16, rng) * 3.0f - Image::Constant(16, 16, 1.0f);
    const auto out = augment(wild, rng);
    CHECK(out.minCoeff() >= 0.0f);
    CHECK(out.maxCoeff() <= 1.0f);
  }
  for (int i = 0; i < 200; ++i) {
    const auto p = draw_augment(16, rng);
    CHECK(std::abs(p.shift_x) <= 1.6);
    CHECK(std::abs(p.rotation) <= 15.0 * 3.14159265358979 / 180.0 + 1e-12);
    CHECK(std::abs(p.shear) <= 0.1);
    CHECK(p.zoom >= 0.9);
    CHECK(p.zoom <= 1.1);
    CHECK(p.noise_sigma <= 0.05);
  }

  // folded normal: E|N(0, s^2)| = s * sqrt(2 / pi)
  AugmentParams noisy;
  noisy.noise_sigma = 0.05;
  const Image grey = Image::Constant(16, 16, 0.5f);
  double total = 0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) total += (apply_augment(grey, noisy, rng) - grey).cwiseAbs().mean();
  const double expect = 0.05 * std::sqrt(2.0 / 3.14159265358979);
  CHECK(total / draws == doctest::Approx(expect).epsilon(0.2));

  std::mt19937_64 r1(3), r2(3);
  CHECK(augment(im, r1) == augment(im, r2));
}

TEST_CASE("weight file round trip") {
  std::mt19937_64 rng(8);
  const auto spec = two_class_spec();
  TrainedNet net{Network<float>(spec), {}};
  net.net.initialize(rng);
  std::stringstream ss;
  write_weights(ss, net);
  // header 8 + 8 + 4, 2 shape words per tensor, then the floats
  const std::size_t tensors = 2 * net.net.params().weights.size();
  CHECK(ss.str().size() == 20 + tensors * 8 + 4 * spec.parameter_count());
  const auto back = read_weights(ss, spec);
  CHECK(back.net.params().flatten() == net.net.params().flatten());

  auto other = spec;
  other.filters = 8;
  std::stringstream again;
  write_weights(again, net);
  CHECK_THROWS(read_weights(again, other));
  std::stringstream junk("not weights at all");
  CHECK_THROWS(read_weights(junk, spec));

  const auto path = std::filesystem::temp_directory_path() / "hpo_weights_test.bin";
  save_weights(path, net);
  CHECK(load_weights(path, spec).net.params().flatten() == net.net.params().flatten());
  std::filesystem::remove(path);
}
