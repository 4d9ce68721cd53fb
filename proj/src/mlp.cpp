#include "vat/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace vat {

namespace {

using ConstWeights = Eigen::Map<const RowMatrix>;
using Weights = Eigen::Map<RowMatrix>;
using ConstBias = Eigen::Map<const Eigen::VectorXd>;
using Bias = Eigen::Map<Eigen::VectorXd>;

}  // namespace

MlpShape::MlpShape(int input, std::vector<int> hidden, int output) {
  if (input <= 0 || output <= 0) throw std::invalid_argument("MlpShape: sizes must be positive");
  sizes_.push_back(input);
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("MlpShape: hidden sizes must be positive");
    sizes_.push_back(h);
  }
  sizes_.push_back(output);
}

std::size_t MlpShape::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  return n;
}

void MlpShape::init(std::span<double> params, Rng& rng, double hidden_gain, double output_gain) const {
  if (params.size() != param_count()) throw std::invalid_argument("MlpShape::init: size mismatch");
  std::size_t offset = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double gain = l + 1 == layers ? output_gain : hidden_gain;
    const double scale = gain / std::sqrt(static_cast<double>(in));
    for (int k = 0; k < in * out; ++k) params[offset++] = scale * rng.normal();
    for (int k = 0; k < out; ++k) params[offset++] = 0.0;
  }
}

Matrix MlpShape::forward(std::span<const double> params, const Matrix& x, Cache* cache) const {
  if (x.cols() != input()) throw std::invalid_argument("MlpShape::forward: input width mismatch");
  if (params.size() != param_count()) throw std::invalid_argument("MlpShape::forward: size mismatch");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Matrix h = x;
  std::size_t offset = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    ConstWeights w(params.data() + offset, out, in);
    offset += static_cast<std::size_t>(in) * out;
    ConstBias b(params.data() + offset, out);
    offset += out;
    Matrix z = h * w.transpose();
    z.rowwise() += b.transpose();
    if (l + 1 < layers) z = z.array().tanh().matrix();
    h = std::move(z);
    if (cache && l + 1 < layers) cache->activations.push_back(h);
  }
  return h;
}

void MlpShape::backward(std::span<const double> params, const Cache& cache, const Matrix& d_out,
                        std::span<double> grad) const {
  if (grad.size() != param_count()) throw std::invalid_argument("MlpShape::backward: size mismatch");
  const std::size_t layers = sizes_.size() - 1;
  std::vector<std::size_t> offsets(layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }

  Matrix delta = d_out;  // dLoss / d(pre-activation) of the current layer
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Matrix& a_in = cache.activations[l];
    Weights gw(grad.data() + offsets[l], out, in);
    Bias gb(grad.data() + offsets[l] + static_cast<std::size_t>(in) * out, out);
    gw.noalias() += delta.transpose() * a_in;
    gb += delta.colwise().sum().transpose();
    if (l == 0) break;
    ConstWeights w(params.data() + offsets[l], out, in);
    Matrix d_in = delta * w;
    // a_in = tanh(z) for hidden layers.
    delta = (d_in.array() * (1.0 - a_in.array().square())).matrix();
  }
}

}  // namespace vat
