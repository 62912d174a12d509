#pragma once

// Small fully-connected networks with a forward tangent channel and an exact
// reverse pass through both value and tangent outputs. Weights live in an
// external flat parameter vector at a fixed offset.

#include "pisonet/core.hpp"

#include <random>

namespace pisonet {

enum class Activation { tanh, silu };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

class DenseNet {
 public:
  struct Tape {
    std::vector<Vec> u, ud;  // pre-activations and their tangents, per layer
    std::vector<Vec> h, hd;  // layer outputs (h[0] = input)
  };

  DenseNet() = default;
  DenseNet(std::vector<int> sizes, Activation act, std::size_t offset);

  std::size_t param_count() const;
  std::size_t offset() const { return offset_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }

  /// Offset of the final layer's weight block / bias block in the parameter vector.
  std::size_t final_weight_offset() const;
  std::size_t final_bias_offset() const;

  /// Evaluates the network and the directional derivative along in_dot.
  void forward(const double* params, const Vec& in, const Vec& in_dot, Tape& tape) const;
  const Vec& output(const Tape& tape) const { return tape.h.back(); }
  const Vec& output_dot(const Tape& tape) const { return tape.hd.back(); }

  /// Accumulates d(loss)/d(params) into grad given adjoints of output and
  /// output tangent. When in_bar is non-null it receives d(loss)/d(input).
  void backward(const double* params, const Tape& tape, const Vec& out_bar, const Vec& out_dot_bar, double* grad,
                Vec* in_bar = nullptr) const;

  /// Hidden layers: U(-1/sqrt(fan_in), 1/sqrt(fan_in)); final layer zero.
  void init(double* params, std::mt19937_64& rng) const;

 private:
  std::vector<int> sizes_;
  Activation act_ = Activation::tanh;
  std::size_t offset_ = 0;
};

}  // namespace pisonet
