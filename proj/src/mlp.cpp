#include "mign/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "mign/errors.hpp"

namespace mign {

Activation activation_from_string(const std::string& s) {
  if (s == "silu") return Activation::silu;
  if (s == "tanh") return Activation::tanh_act;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::silu: return "silu";
    case Activation::tanh_act: return "tanh";
    case Activation::identity: return "identity";
  }
  return "silu";
}

namespace {

inline double act_fwd(Activation a, double x) {
  switch (a) {
    case Activation::silu: return x / (1.0 + std::exp(-x));
    case Activation::tanh_act: return std::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

inline double act_grad(Activation a, double x) {
  switch (a) {
    case Activation::silu: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::tanh_act: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

Mlp make_mlp(std::size_t in, std::size_t hidden, std::size_t out, int hidden_layers,
             Activation act, Rng& rng) {
  if (in == 0 || out == 0) throw ShapeError("make_mlp: zero layer width");
  Mlp mlp;
  mlp.act = act;
  std::size_t prev = in;
  for (int l = 0; l < hidden_layers; ++l) {
    DenseLayer layer;
    layer.w = Matrix(hidden, prev);
    layer.b.assign(hidden, 0.0);
    const double a = 1.0 / std::sqrt(static_cast<double>(prev));
    for (double& v : layer.w.flat()) v = rng.uniform(-a, a);
    mlp.layers.push_back(std::move(layer));
    prev = hidden;
  }
  DenseLayer last;
  last.w = Matrix(out, prev);
  last.b.assign(out, 0.0);
  const double a = 1.0 / std::sqrt(static_cast<double>(prev));
  for (double& v : last.w.flat()) v = rng.uniform(-a, a);
  mlp.layers.push_back(std::move(last));
  return mlp;
}

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpTrace* trace, Exec ex) {
  if (x.cols() != mlp.in_dim()) throw ShapeError("mlp_forward: input width mismatch");
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Matrix cur = x;
  const std::size_t n_layers = mlp.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (trace) trace->inputs.push_back(cur);
    Matrix z;
    matmul_abt(cur, mlp.layers[l].w, z, ex);
    add_bias_rows(z, mlp.layers[l].b, ex);
    if (l + 1 < n_layers) {
      if (trace) trace->pre.push_back(z);
      const Activation act = mlp.act;
      parallel_for(z.rows(), ex, [&](std::size_t r) {
        double* zr = z.row(r);
        for (std::size_t c = 0; c < z.cols(); ++c) zr[c] = act_fwd(act, zr[c]);
      });
    }
    cur = std::move(z);
  }
  return cur;
}

Matrix mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Matrix& d_out, Mlp& grad,
                    Exec ex) {
  if (grad.layers.size() != mlp.layers.size())
    throw ShapeError("mlp_backward: gradient layer count mismatch");
  Matrix dy = d_out;
  for (std::size_t li = mlp.layers.size(); li-- > 0;) {
    Matrix dz = std::move(dy);
    if (li + 1 < mlp.layers.size()) {
      const Matrix& pre = trace.pre[li];
      const Activation act = mlp.act;
      parallel_for(dz.rows(), ex, [&](std::size_t r) {
        double* dr = dz.row(r);
        const double* pr = pre.row(r);
        for (std::size_t c = 0; c < dz.cols(); ++c) dr[c] *= act_grad(act, pr[c]);
      });
    }
    matmul_atb_accum(dz, trace.inputs[li], grad.layers[li].w, ex);
    colsum_accum(dz, grad.layers[li].b, ex);
    matmul_ab(dz, mlp.layers[li].w, dy, ex);
  }
  return dy;
}

std::vector<double> mlp_apply(const Mlp& mlp, std::span<const double> v) {
  Matrix x(1, v.size());
  std::copy(v.begin(), v.end(), x.row(0));
  Matrix y = mlp_forward(mlp, x);
  return std::vector<double>(y.row(0), y.row(0) + y.cols());
}

Mlp zeros_like(const Mlp& mlp) {
  Mlp g;
  g.act = mlp.act;
  g.layers.reserve(mlp.layers.size());
  for (const auto& l : mlp.layers) {
    DenseLayer z;
    z.w = Matrix(l.w.rows(), l.w.cols());
    z.b.assign(l.b.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

}  // namespace mign
