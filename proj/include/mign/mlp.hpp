#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mign/rng.hpp"
#include "mign/tensor.hpp"

namespace mign {

enum class Activation { silu, tanh_act, identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct DenseLayer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
};

// Affine -> activation per hidden layer; final layer affine only.
struct Mlp {
  std::vector<DenseLayer> layers;
  Activation act = Activation::silu;

  std::size_t in_dim() const { return layers.front().w.cols(); }
  std::size_t out_dim() const { return layers.back().w.rows(); }
};

// `hidden_layers` hidden layers of width `hidden`, then a linear output
// layer. Weights uniform in +-1/sqrt(fan_in), biases zero.
Mlp make_mlp(std::size_t in, std::size_t hidden, std::size_t out, int hidden_layers,
             Activation act, Rng& rng);

// Cached intermediates for the backward pass: the input rows to each layer
// and the pre-activation values of each hidden layer.
struct MlpTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

// Applies the MLP to a batch of rows. Pass a trace to enable backward.
Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpTrace* trace = nullptr,
                   Exec ex = default_exec());

// Propagates output adjoints back to the input rows; accumulates parameter
// gradients into `grad` (same shapes as `mlp`).
Matrix mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Matrix& d_out, Mlp& grad,
                    Exec ex = default_exec());

// Single-row convenience.
std::vector<double> mlp_apply(const Mlp& mlp, std::span<const double> v);

Mlp zeros_like(const Mlp& mlp);

}  // namespace mign
