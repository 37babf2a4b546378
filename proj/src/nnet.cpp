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
#include "hpo/nnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace hpo::nnet {

std::string_view to_string(Preset p) { return p == Preset::Desk ? "desk" : "paper"; }

Preset preset_from_string(std::string_view s) {
  if (s == "desk") return Preset::Desk;
  if (s == "paper") return Preset::Paper;
  throw std::invalid_argument("unknown preset '" + std::string(s) + "'");
}

PresetShape preset_shape(Preset p) {
  if (p == Preset::Desk) return {16, {128, 64}, 2'000'000};
  return {64, {4096, 1024}, std::numeric_limits<std::uint64_t>::max()};
}

// ------------------------------------------------------------------ NetSpec

std::uint64_t NetSpec::parameter_count() const {
  std::uint64_t n = 0;
  std::uint64_t in = static_cast<std::uint64_t>(input_channels);
  const auto s2 = static_cast<std::uint64_t>(filter_size) * static_cast<std::uint64_t>(filter_size);
  const auto f = static_cast<std::uint64_t>(filters);
  for (int b = 0; b < blocks; ++b)
    for (int c = 0; c < convs_per_block; ++c) {
      n += f * in * s2 + f;
      in = f;
    }
  std::uint64_t width = static_cast<std::uint64_t>(flat_features());
  for (int w : fc_widths) {
    n += width * static_cast<std::uint64_t>(w) + static_cast<std::uint64_t>(w);
    width = static_cast<std::uint64_t>(w);
  }
  n += width * static_cast<std::uint64_t>(num_classes) + static_cast<std::uint64_t>(num_classes);
  return n;
}

double NetSpec::forward_macs() const {
  double macs = 0;
  double in = input_channels;
  double side = input_side;
  for (int b = 0; b < blocks; ++b) {
    for (int c = 0; c < convs_per_block; ++c) {
      macs += static_cast<double>(filters) * in * filter_size * filter_size * side * side;
      in = filters;
    }
    side /= 2;
  }
  double width = flat_features();
  for (int w : fc_widths) {
    macs += width * w;
    width = w;
  }
  return macs + width * num_classes;
}

std::string NetSpec::describe() const {
  std::ostringstream os;
  os << "input " << input_side << 'x' << input_side << 'x' << input_channels;
  int side = input_side;
  for (int b = 0; b < blocks; ++b) {
    os << " | " << convs_per_block << " x conv " << filter_size << 'x' << filter_size << 'x' << filters
       << " relu, pool -> " << (side / 2) << 'x' << (side / 2);
    side /= 2;
  }
  for (int w : fc_widths) os << " | fc " << w << " relu";
  os << " | fc " << num_classes << " softmax";
  return os.str();
}

std::uint64_t NetSpec::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : describe()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

HyperParams hyper_params(const ParamSpace& space, const ParamPoint& p) {
  space.validate(p);
  auto raw = [&](std::string_view name) { return p.values[space.index_of(name)]; };
  auto derived = [&](std::string_view name) { return space.dim(name).derived(raw(name)); };
  HyperParams hp;
  hp.blocks = static_cast<int>(derived("b"));
  hp.convs_per_block = static_cast<int>(derived("c"));
  hp.filters = static_cast<int>(derived("r"));
  hp.filter_size = static_cast<int>(derived("s"));
  hp.learning_rate = derived("l");
  hp.batch_size = static_cast<int>(derived("a"));
  hp.epochs = static_cast<int>(derived("e"));
  hp.augment = space.dim("g").format(raw("g")) == "Yes";
  return hp;
}

NetSpec build(const HyperParams& hp, const PresetShape& shape) {
  NetSpec spec;
  spec.input_side = shape.input_side;
  spec.blocks = hp.blocks;
  spec.convs_per_block = hp.convs_per_block;
  spec.filters = hp.filters;
  spec.filter_size = hp.filter_size;
  spec.fc_widths = shape.fc_widths;
  if (hp.blocks < 1 || hp.convs_per_block < 1 || hp.filters < 1 || hp.filter_size < 1 || hp.filter_size % 2 == 0)
    throw std::invalid_argument("architecture needs >= 1 block, conv and filter, and an odd filter size");
  if (hp.blocks >= 31 || (shape.input_side >> hp.blocks) < 1)
    throw SpatialCollapseError(std::to_string(hp.blocks) + " pools shrink a " + std::to_string(shape.input_side) +
                               " px input below 1x1");
  const auto count = spec.parameter_count();
  if (count > shape.max_params) throw ParameterCapError(count, shape.max_params);
  return spec;
}

NetSpec build(const ParamSpace& space, const ParamPoint& p, Preset preset, std::optional<std::uint64_t> max_params) {
  auto shape = preset_shape(preset);
  if (max_params) shape.max_params = *max_params;
  return build(hyper_params(space, p), shape);
}

void TrainParams::validate() const {
  if (!(learning_rate > 0) || batch_size < 1 || epochs < 1 || momentum < 0 || decay < 0 || augment_factor < 1)
    throw std::invalid_argument("training parameters must be positive, epochs >= 1");
}

TrainParams train_params(const HyperParams& hp, std::uint64_t seed) {
  TrainParams tp;
  tp.learning_rate = hp.learning_rate;
  tp.batch_size = hp.batch_size;
  tp.epochs = hp.epochs;
  tp.augment = hp.augment;
  tp.seed = seed;
  return tp;
}

// ---------------------------------------------------------------- Parameters

template <typename Scalar>
std::size_t Parameters<Scalar>::size() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::zeros_like() const {
  Parameters z = *this;
  z.set_zero();
  return z;
}

template <typename Scalar>
void Parameters<Scalar>::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

template <typename Scalar>
typename Parameters<Scalar>::Vector Parameters<Scalar>::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    flat.segment(k, weights[i].size()) = weights[i].reshaped();
    k += weights[i].size();
    flat.segment(k, biases[i].size()) = biases[i];
    k += biases[i].size();
  }
  return flat;
}

template <typename Scalar>
void Parameters<Scalar>::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) throw std::invalid_argument("parameter size mismatch");
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i].reshaped() = flat.segment(k, weights[i].size());
    k += weights[i].size();
    biases[i] = flat.segment(k, biases[i].size());
    k += biases[i].size();
  }
}

template <typename Scalar>
void sgd_step(Parameters<Scalar>& params, Parameters<Scalar>& velocity, const Parameters<Scalar>& grad, Scalar lr,
              Scalar momentum) {
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    velocity.weights[i] = momentum * velocity.weights[i] - lr * grad.weights[i];
    params.weights[i] = params.weights[i] + momentum * velocity.weights[i] - lr * grad.weights[i];
    velocity.biases[i] = momentum * velocity.biases[i] - lr * grad.biases[i];
    params.biases[i] = params.biases[i] + momentum * velocity.biases[i] - lr * grad.biases[i];
  }
}

// ------------------------------------------------------------------- Network

template <typename Scalar>
struct Network<Scalar>::Trace {
  std::vector<Matrix> cols;       // im2col input of each conv
  std::vector<Matrix> conv_out;   // post-ReLU output of each conv
  std::vector<std::vector<int>> pool_arg;  // argmax input pixel per (channel, output pixel)
  std::vector<Vector> dense_in;
  std::vector<Vector> dense_out;  // post-activation (ReLU), logits for the last
};

namespace {

template <typename Matrix>
void im2col(const Matrix& a, int channels, int side, int size, Matrix& col) {
  const int pad = size / 2;
  col.resize(static_cast<Eigen::Index>(size) * size * channels, static_cast<Eigen::Index>(side) * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const Eigen::Index p = static_cast<Eigen::Index>(r) * side + c;
      for (int ky = 0; ky < size; ++ky) {
        const int rr = r + ky - pad;
        for (int kx = 0; kx < size; ++kx) {
          const int cc = c + kx - pad;
          const Eigen::Index row = static_cast<Eigen::Index>(ky * size + kx) * channels;
          if (rr < 0 || rr >= side || cc < 0 || cc >= side)
            col.col(p).segment(row, channels).setZero();
          else
            col.col(p).segment(row, channels) = a.col(static_cast<Eigen::Index>(rr) * side + cc);
        }
      }
    }
}

template <typename Matrix>
void col2im(const Matrix& dcol, int channels, int side, int size, Matrix& da) {
  const int pad = size / 2;
  da.setZero(channels, static_cast<Eigen::Index>(side) * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const Eigen::Index p = static_cast<Eigen::Index>(r) * side + c;
      for (int ky = 0; ky < size; ++ky) {
        const int rr = r + ky - pad;
        if (rr < 0 || rr >= side) continue;
        for (int kx = 0; kx < size; ++kx) {
          const int cc = c + kx - pad;
          if (cc < 0 || cc >= side) continue;
          const Eigen::Index row = static_cast<Eigen::Index>(ky * size + kx) * channels;
          da.col(static_cast<Eigen::Index>(rr) * side + cc) += dcol.col(p).segment(row, channels);
        }
      }
    }
}

template <typename Matrix>
void max_pool(const Matrix& a, int side, Matrix& out, std::vector<int>* arg) {
  const int half = side / 2;
  const Eigen::Index channels = a.rows();
  out.resize(channels, static_cast<Eigen::Index>(half) * half);
  if (arg) arg->assign(static_cast<std::size_t>(out.size()), 0);
  for (int r = 0; r < half; ++r)
    for (int c = 0; c < half; ++c) {
      const Eigen::Index q = static_cast<Eigen::Index>(r) * half + c;
      const int p00 = (2 * r) * side + 2 * c;
      const int cand[4] = {p00, p00 + 1, p00 + side, p00 + side + 1};
      for (Eigen::Index ch = 0; ch < channels; ++ch) {
        int best = cand[0];
        auto v = a(ch, best);
        for (int k = 1; k < 4; ++k)
          if (a(ch, cand[k]) > v) {
            v = a(ch, cand[k]);
            best = cand[k];
          }
        out(ch, q) = v;
        if (arg) (*arg)[static_cast<std::size_t>(q * channels + ch)] = best;
      }
    }
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(NetSpec spec) : spec_(std::move(spec)) {
  if ((spec_.input_side >> spec_.blocks) < 1) throw SpatialCollapseError("spatial size collapses below 1x1");
  int in = spec_.input_channels;
  int side = spec_.input_side;
  for (int b = 0; b < spec_.blocks; ++b) {
    for (int c = 0; c < spec_.convs_per_block; ++c) {
      convs_.push_back({in, spec_.filters, spec_.filter_size, side});
      params_.weights.emplace_back(Matrix::Zero(spec_.filters, spec_.filter_size * spec_.filter_size * in));
      params_.biases.emplace_back(Vector::Zero(spec_.filters));
      in = spec_.filters;
    }
    pool_after_.push_back(static_cast<int>(convs_.size()) - 1);
    side /= 2;
  }
  int width = spec_.flat_features();
  std::vector<int> outs = spec_.fc_widths;
  outs.push_back(spec_.num_classes);
  for (int w : outs) {
    params_.weights.emplace_back(Matrix::Zero(w, width));
    params_.biases.emplace_back(Vector::Zero(w));
    width = w;
  }
}

template <typename Scalar>
void Network<Scalar>::initialize(std::mt19937_64& rng) {
  for (std::size_t i = 0; i < params_.weights.size(); ++i) {
    auto& w = params_.weights[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, j) = static_cast<Scalar>(u(rng));
    params_.biases[i].setZero();
  }
}

template <typename Scalar>
void Network<Scalar>::forward(const Image& image, Trace* trace, Vector& logits) const {
  const int side0 = spec_.input_side;
  if (image.rows() != side0 || image.cols() != side0)
    throw std::invalid_argument("image is " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                                ", network expects " + std::to_string(side0) + "x" + std::to_string(side0));
  Matrix a(1, static_cast<Eigen::Index>(side0) * side0);
  for (int r = 0; r < side0; ++r)
    for (int c = 0; c < side0; ++c) a(0, static_cast<Eigen::Index>(r) * side0 + c) = static_cast<Scalar>(image(r, c));

  if (trace) {
    trace->cols.resize(convs_.size());
    trace->conv_out.resize(convs_.size());
    trace->pool_arg.resize(pool_after_.size());
  }
  Matrix col, pooled;
  std::size_t next_pool = 0;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const auto& cs = convs_[i];
    Matrix& cm = trace ? trace->cols[i] : col;
    im2col(a, cs.in_channels, cs.side, cs.size, cm);
    a.noalias() = params_.weights[i] * cm;
    a.colwise() += params_.biases[i];
    a = a.cwiseMax(Scalar(0));
    if (trace) trace->conv_out[i] = a;
    if (next_pool < pool_after_.size() && pool_after_[next_pool] == static_cast<int>(i)) {
      max_pool(a, cs.side, pooled, trace ? &trace->pool_arg[next_pool] : nullptr);
      a.swap(pooled);
      ++next_pool;
    }
  }

  Vector x = a.reshaped();
  const std::size_t first_dense = convs_.size();
  const std::size_t n_dense = params_.weights.size() - first_dense;
  if (trace) {
    trace->dense_in.resize(n_dense);
    trace->dense_out.resize(n_dense);
  }
  for (std::size_t j = 0; j < n_dense; ++j) {
    if (trace) trace->dense_in[j] = x;
    Vector z = params_.weights[first_dense + j] * x + params_.biases[first_dense + j];
    if (j + 1 < n_dense) z = z.cwiseMax(Scalar(0));
    if (trace) trace->dense_out[j] = z;
    x.swap(z);
  }
  logits.swap(x);
}

template <typename Scalar>
typename Network<Scalar>::Vector Network<Scalar>::logits(const Image& image) const {
  Vector z;
  forward(image, nullptr, z);
  return z;
}

template <typename Scalar>
typename Network<Scalar>::Vector Network<Scalar>::predict_proba(const Image& image) const {
  return softmax(logits(image));
}

template <typename Scalar>
double Network<Scalar>::loss(std::span<const Image* const> images, std::span<const int> labels,
                             std::span<const double> class_weights) const {
  if (images.empty()) throw std::invalid_argument("loss: empty batch");
  Matrix probs(spec_.num_classes, static_cast<Eigen::Index>(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) probs.col(static_cast<Eigen::Index>(i)) = predict_proba(*images[i]);
  return weighted_cross_entropy(probs, labels, class_weights);
}

template <typename Scalar>
double Network<Scalar>::loss_and_gradient(std::span<const Image* const> images, std::span<const int> labels,
                                          std::span<const double> class_weights, Parameters<Scalar>& grad) const {
  if (images.empty() || images.size() != labels.size())
    throw std::invalid_argument("loss_and_gradient: need a nonempty batch with one label per image");
  if (grad.weights.size() != params_.weights.size()) grad = params_.zeros_like();
  else grad.set_zero();

  const auto batch = static_cast<Scalar>(images.size());
  const std::size_t first_dense = convs_.size();
  const std::size_t n_dense = params_.weights.size() - first_dense;
  Trace tr;
  Vector z;
  Matrix da, dz, dcol, dpool;
  double total = 0;

  for (std::size_t n = 0; n < images.size(); ++n) {
    forward(*images[n], &tr, z);
    const int y = labels[n];
    const Scalar w = static_cast<Scalar>(class_weights[static_cast<std::size_t>(y)]);
    Vector p = softmax(z);
    total += static_cast<double>(w) * -std::log(std::max(static_cast<double>(p(y)), 1e-12));

    // d loss / d logits
    Vector dy = p;
    dy(y) -= Scalar(1);
    dy *= w / batch;

    for (std::size_t j = n_dense; j-- > 0;) {
      if (j + 1 < n_dense) dy = (tr.dense_out[j].array() > Scalar(0)).select(dy, Scalar(0));
      grad.weights[first_dense + j].noalias() += dy * tr.dense_in[j].transpose();
      grad.biases[first_dense + j] += dy;
      dy = params_.weights[first_dense + j].transpose() * dy;
    }
    if (convs_.empty()) continue;

    // back through the conv stack; dy holds d/d(flattened last pool output)
    const Eigen::Index last_channels = convs_.back().out_channels;
    da = dy.reshaped(last_channels, dy.size() / last_channels);
    std::size_t pool_k = pool_after_.size();
    for (std::size_t i = convs_.size(); i-- > 0;) {
      const auto& cs = convs_[i];
      if (pool_k > 0 && pool_after_[pool_k - 1] == static_cast<int>(i)) {
        --pool_k;
        const auto& arg = tr.pool_arg[pool_k];
        dpool.setZero(cs.out_channels, static_cast<Eigen::Index>(cs.side) * cs.side);
        for (Eigen::Index q = 0; q < da.cols(); ++q)
          for (Eigen::Index ch = 0; ch < da.rows(); ++ch)
            dpool(ch, arg[static_cast<std::size_t>(q * da.rows() + ch)]) += da(ch, q);
        da.swap(dpool);
      }
      dz = (tr.conv_out[i].array() > Scalar(0)).select(da, Scalar(0));
      grad.weights[i].noalias() += dz * tr.cols[i].transpose();
      grad.biases[i] += dz.rowwise().sum();
      if (i > 0) {
        dcol.noalias() = params_.weights[i].transpose() * dz;
        col2im(dcol, cs.in_channels, cs.side, cs.size, da);
      }
    }
  }
  return total / static_cast<double>(images.size());
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Network<float>;
template class Network<double>;
template void sgd_step<float>(Parameters<float>&, Parameters<float>&, const Parameters<float>&, float, float);
template void sgd_step<double>(Parameters<double>&, Parameters<double>&, const Parameters<double>&, double, double);

// ------------------------------------------------------------------ training

Eigen::VectorXd TrainedNet::predict_proba(const Image& image) const {
  return net.predict_proba(image).cast<double>();
}

Evaluation evaluate(const TrainedNet& net, const LabeledImages& set, std::span<const double> class_weights) {
  if (set.size() == 0) throw std::invalid_argument("evaluate: empty set");
  Eigen::MatrixXd probs(net.spec().num_classes, static_cast<Eigen::Index>(set.size()));
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    probs.col(static_cast<Eigen::Index>(i)) = net.predict_proba(*set.images[i]);
    Eigen::Index arg = 0;
    probs.col(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    if (arg != set.labels[i]) ++wrong;
  }
  return {weighted_cross_entropy(probs, set.labels, class_weights),
          static_cast<double>(wrong) / static_cast<double>(set.size())};
}

TrainedNet train(const NetSpec& spec, const LabeledImages& train_set, const LabeledImages& val_set,
                 std::span<const double> class_weights, const TrainParams& tp, const StepObserver& observer) {
  tp.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  std::mt19937_64 rng(tp.seed);
  TrainedNet out{Network<float>(spec), {}};
  out.net.initialize(rng);
  auto& params = out.net.params();
  Parameters<float> grad = params.zeros_like();
  Parameters<float> velocity = params.zeros_like();

  const std::size_t n = train_set.size();
  const std::size_t per_epoch = tp.augment ? n * static_cast<std::size_t>(tp.augment_factor) : n;
  std::vector<Image> augmented;
  std::vector<const Image*> order_img(per_epoch);
  std::vector<int> order_lab(per_epoch);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  std::uint64_t step = 0;
  double epoch_loss = 0;
  for (int epoch = 0; epoch < tp.epochs && !out.metrics.diverged; ++epoch) {
    if (tp.augment) {
      augmented.resize(per_epoch);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < per_epoch; ++i) {
        const std::size_t k = pick(rng);
        augmented[i] = augment(*train_set.images[k], rng);
        order_img[i] = &augmented[i];
        order_lab[i] = train_set.labels[k];
      }
    } else {
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t i = 0; i < n; ++i) {
        order_img[i] = train_set.images[perm[i]];
        order_lab[i] = train_set.labels[perm[i]];
      }
    }
    double sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < per_epoch; start += static_cast<std::size_t>(tp.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(tp.batch_size), per_epoch - start);
      const double lr_t = tp.learning_rate / (1.0 + tp.decay * static_cast<double>(step));
      const double l = out.net.loss_and_gradient(std::span(order_img).subspan(start, len),
                                                 std::span<const int>(order_lab).subspan(start, len), class_weights,
                                                 grad);
      if (observer) observer(step, l);
      if (!std::isfinite(l)) {
        out.metrics.diverged = true;
        break;
      }
      sgd_step<float>(params, velocity, grad, static_cast<float>(lr_t), static_cast<float>(tp.momentum));
      ++step;
      sum += l;
      ++batches;
    }
    if (batches) epoch_loss = sum / static_cast<double>(batches);
  }
  out.metrics.steps = step;
  out.metrics.train_loss = epoch_loss;

  if (val_set.size() > 0) {
    const auto ev = evaluate(out, val_set, class_weights);
    out.metrics.val_loss = ev.loss;
    out.metrics.val_error = ev.error;
    const double uniform = std::log(static_cast<double>(spec.num_classes));
    if (!std::isfinite(ev.loss) || ev.loss > 10.0 * uniform) out.metrics.diverged = true;
  }
  return out;
}

TrainedNet train(const NetSpec& spec, const SliceDataset& data, const TrainParams& tp) {
  return train(spec, slices_of(data, Split::Train), slices_of(data, Split::Validation), data.class_weights, tp);
}

// -------------------------------------------------------------- weight files

namespace {

constexpr char kMagic[8] = {'H', 'P', 'O', 'N', 'E', 'T', '0', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "weight files are little-endian");
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("weight file truncated");
  return v;
}

}  // namespace

void write_weights(std::ostream& os, const TrainedNet& net) {
  const auto& p = net.net.params();
  os.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(os, net.spec().hash());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(2 * p.weights.size()));
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.weights[i].rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.weights[i].cols()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.biases[i].size()));
    put<std::uint32_t>(os, 1u);
  }
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    for (Eigen::Index r = 0; r < p.weights[i].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[i].cols(); ++c) put<float>(os, p.weights[i](r, c));
    for (Eigen::Index r = 0; r < p.biases[i].size(); ++r) put<float>(os, p.biases[i](r));
  }
}

TrainedNet read_weights(std::istream& is, const NetSpec& spec) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a weight file");
  if (get<std::uint64_t>(is) != spec.hash()) throw std::runtime_error("weight file belongs to a different network");
  TrainedNet out{Network<float>(spec), {}};
  auto& p = out.net.params();
  if (get<std::uint32_t>(is) != 2 * p.weights.size()) throw std::runtime_error("weight file tensor count mismatch");
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const auto wr = get<std::uint32_t>(is), wc = get<std::uint32_t>(is);
    const auto br = get<std::uint32_t>(is), bc = get<std::uint32_t>(is);
    if (wr != p.weights[i].rows() || wc != p.weights[i].cols() || br != p.biases[i].size() || bc != 1)
      throw std::runtime_error("weight file shape mismatch at layer " + std::to_string(i));
  }
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    for (Eigen::Index r = 0; r < p.weights[i].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[i].cols(); ++c) p.weights[i](r, c) = get<float>(is);
    for (Eigen::Index r = 0; r < p.biases[i].size(); ++r) p.biases[i](r) = get<float>(is);
  }
  return out;
}

void save_weights(const std::filesystem::path& path, const TrainedNet& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_weights(os, net);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

TrainedNet load_weights(const std::filesystem::path& path, const NetSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_weights(is, spec);
}

}  // namespace hpo::nnet
