#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "vat/rng.hpp"

namespace vat {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Layer sizes of a tanh perceptron with a linear output layer. Parameters
/// live outside the shape in one flat vector: per layer, the row-major
/// (out x in) weight matrix followed by the bias.
class MlpShape {
 public:
  MlpShape() = default;
  MlpShape(int input, std::vector<int> hidden, int output);

  int input() const { return sizes_.front(); }
  int output() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t param_count() const;

  /// Scaled-normal weights (gain / sqrt(fan_in)), zero biases; the output
  /// layer uses `output_gain` instead of `hidden_gain`.
  void init(std::span<double> params, Rng& rng, double hidden_gain, double output_gain) const;

  /// Per-layer activations kept for the backward pass.
  struct Cache {
    std::vector<Matrix> activations;  // activations[0] is the input
  };

  /// Rows of `x` are samples.
  Matrix forward(std::span<const double> params, const Matrix& x, Cache* cache = nullptr) const;

  /// Accumulates dLoss/dParams into `grad` given dLoss/dOutput.
  void backward(std::span<const double> params, const Cache& cache, const Matrix& d_out,
                std::span<double> grad) const;

 private:
  std::vector<int> sizes_;
};

}  // namespace vat
