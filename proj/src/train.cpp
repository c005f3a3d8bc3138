#include "mign/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "mign/errors.hpp"
#include "mign/rng.hpp"

namespace mign {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty()) throw DataError("metric over empty vectors");
  if (pred.size() != truth.size()) throw ShapeError("metric length mismatch");
}

}  // namespace

double sse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return acc;
}

double mse(std::span<const double> pred, std::span<const double> truth) {
  return sse(pred, truth) / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(pred.size());
}

void TrainConfig::validate() const {
  if (learning_rate < 0.0 || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

LatentSpace latent_for_sample(const MignModel& model, const Sample& sample,
                              const LatentSpace* shared, Exec ex) {
  if (model.cfg.use_mesh) {
    if (!shared) throw ConfigError("mesh model requires a shared latent space");
    return *shared;
  }
  if (model.cfg.multistep())
    throw ConfigError("mesh-free mode supports single-step models only");
  return make_latent_space(std::span<const GeoCoord>(sample.inputs.front().coords), model.cfg,
                           ex);
}

namespace {

// Avoids copying the shared latent per sample.
const LatentSpace* sample_latent(const MignModel& model, const Sample& sample,
                                 const LatentSpace* shared, LatentSpace& storage, Exec ex) {
  if (model.cfg.use_mesh) {
    if (!shared) throw ConfigError("mesh model requires a shared latent space");
    return shared;
  }
  storage = latent_for_sample(model, sample, nullptr, ex);
  return &storage;
}

std::vector<std::vector<GeoCoord>> target_coord_sets(const Sample& sample) {
  std::vector<std::vector<GeoCoord>> sets;
  sets.reserve(sample.targets.size());
  for (const auto& snap : sample.targets) sets.push_back(snap.coords);
  return sets;
}

double sample_mse(std::span<const std::vector<double>> preds, const Sample& sample) {
  double acc = 0.0;
  for (std::size_t j = 0; j < preds.size(); ++j)
    acc += mse(preds[j], sample.targets[j].values);
  return acc / static_cast<double>(preds.size());
}

void check_sample(const Sample& sample, const MignModel& model) {
  if (sample.inputs.size() != static_cast<std::size_t>(model.cfg.input_steps))
    throw ShapeError("sample input step count does not match the model");
  if (sample.targets.size() != static_cast<std::size_t>(model.cfg.output_steps))
    throw ShapeError("sample target step count does not match the model");
  for (const auto& t : sample.targets)
    if (t.size() == 0) throw DataError("sample has an empty target snapshot");
}

// Processing order is canonicalized by input date (stable), so batch loss
// and gradients are functions of the batch as a set, bitwise.
std::vector<const Sample*> date_sorted(std::span<const Sample* const> batch) {
  std::vector<const Sample*> order(batch.begin(), batch.end());
  std::stable_sort(order.begin(), order.end(), [](const Sample* a, const Sample* b) {
    return a->inputs.front().date < b->inputs.front().date;
  });
  return order;
}

double batch_loss_impl(const MignModel& model, std::span<const Sample* const> unordered,
                       const LatentSpace* shared, Exec ex) {
  if (unordered.empty()) throw DataError("empty batch");
  const auto batch = date_sorted(unordered);
  double total = 0.0;
  LatentSpace storage;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Sample& sample = *batch[s];
    check_sample(sample, model);
    const LatentSpace* latent = sample_latent(model, sample, shared, storage, ex);
    const auto sets = target_coord_sets(sample);
    const auto preds = temporal_forward(sample.inputs, sets, *latent, model, ex);
    const double loss = sample_mse(preds, sample);
    if (!std::isfinite(loss))
      throw NumericError("non-finite loss in batch element " + std::to_string(s) + " (date " +
                         std::to_string(sample.inputs.front().date) + ")");
    total += loss;
  }
  return total / static_cast<double>(batch.size());
}

double loss_and_grad_impl(const MignModel& model, std::span<const Sample* const> unordered,
                          const LatentSpace* shared, MignModel& grads, Exec ex) {
  if (unordered.empty()) throw DataError("empty batch");
  const auto batch = date_sorted(unordered);
  double total = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  LatentSpace storage;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Sample& sample = *batch[s];
    check_sample(sample, model);
    const LatentSpace* latent = sample_latent(model, sample, shared, storage, ex);
    const auto sets = target_coord_sets(sample);

    ForwardTrace trace;
    const auto preds = forward_with_trace(sample.inputs, sets, *latent, model, trace, ex);
    const double loss = sample_mse(preds, sample);
    if (!std::isfinite(loss))
      throw NumericError("non-finite loss in batch element " + std::to_string(s) + " (date " +
                         std::to_string(sample.inputs.front().date) + ")");
    total += loss;

    const double inv_steps = 1.0 / static_cast<double>(preds.size());
    std::vector<std::vector<double>> d_preds(preds.size());
    for (std::size_t j = 0; j < preds.size(); ++j) {
      const auto& truth = sample.targets[j].values;
      const double scale = 2.0 * inv_batch * inv_steps / static_cast<double>(truth.size());
      d_preds[j].resize(truth.size());
      for (std::size_t i = 0; i < truth.size(); ++i)
        d_preds[j][i] = scale * (preds[j][i] - truth[i]);
    }
    backward(model, *latent, trace, d_preds, grads, ex);
  }
  return total * inv_batch;
}

std::vector<const Sample*> to_pointers(std::span<const Sample> batch) {
  std::vector<const Sample*> ptrs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
  return ptrs;
}

}  // namespace

double batch_loss(const MignModel& model, std::span<const Sample> batch,
                  const LatentSpace* shared, Exec ex) {
  return batch_loss_impl(model, to_pointers(batch), shared, ex);
}

double loss_and_grad(const MignModel& model, std::span<const Sample> batch,
                     const LatentSpace* shared, MignModel& grads, Exec ex) {
  return loss_and_grad_impl(model, to_pointers(batch), shared, grads, ex);
}

AdamState make_adam_state(const MignModel& model) {
  AdamState st;
  for (const auto& t : parameter_tensors(model)) {
    st.m.emplace_back(t.size, 0.0);
    st.v.emplace_back(t.size, 0.0);
  }
  return st;
}

void adam_step(MignModel& model, const MignModel& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const auto params = parameter_tensors(model);
  const auto gs = parameter_tensors(grads);
  if (params.size() != state.m.size() || params.size() != gs.size())
    throw ShapeError("adam_step: state/gradient tensors do not match the model");

  for (std::size_t t = 0; t < gs.size(); ++t) {
    if (params[t].size != gs[t].size)
      throw ShapeError("adam_step: gradient shape mismatch at " + params[t].name);
    for (std::size_t i = 0; i < gs[t].size; ++i)
      if (!std::isfinite(gs[t].data[i]))
        throw NumericError("non-finite gradient in tensor " + gs[t].name + "; step refused");
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    double* p = params[t].data;
    const double* g = gs[t].data;
    double* m = state.m[t].data();
    double* v = state.v[t].data();
    for (std::size_t i = 0; i < params[t].size; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
}

TrainResult train(const TrainConfig& tcfg, const ModelConfig& mcfg, const Dataset& train_data,
                  const Dataset& val_data, Exec ex) {
  tcfg.validate();
  mcfg.validate();
  if (train_data.samples.empty()) throw DataError("train: empty training dataset");
  if (val_data.samples.empty()) throw DataError("train: empty validation dataset");

  MignModel model = make_model(mcfg, tcfg.seed);
  AdamState adam = make_adam_state(model);

  LatentSpace mesh_latent;
  const LatentSpace* shared = nullptr;
  if (mcfg.use_mesh) {
    mesh_latent = make_latent_space(build_mesh(mcfg.mesh_level), mcfg, ex);
    shared = &mesh_latent;
  }

  // Losses are optimized in z-score units and reported in physical units.
  const double var_scale = train_data.stats.std * train_data.stats.std;

  auto val_mse = [&]() {
    double acc = 0.0;
    LatentSpace storage;
    for (const auto& sample : val_data.samples) {
      const LatentSpace* latent = sample_latent(model, sample, shared, storage, ex);
      const auto sets = target_coord_sets(sample);
      const auto preds = temporal_forward(sample.inputs, sets, *latent, model, ex);
      acc += sample_mse(preds, sample);
    }
    return acc / static_cast<double>(val_data.samples.size()) * var_scale;
  };

  TrainResult result;
  MignModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;
  Rng shuffle_rng(tcfg.seed);

  std::vector<std::size_t> order(train_data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    std::vector<const Sample*> batch;
    for (std::size_t i = 0; i < order.size(); i += tcfg.batch_size) {
      batch.clear();
      const std::size_t hi = std::min(order.size(), i + tcfg.batch_size);
      for (std::size_t j = i; j < hi; ++j) batch.push_back(&train_data.samples[order[j]]);
      MignModel grads = zeros_like(model);
      epoch_loss += loss_and_grad_impl(model, batch, shared, grads, ex);
      adam_step(model, grads, adam, tcfg.learning_rate);
      ++n_batches;
    }
    const double train_mse = epoch_loss / static_cast<double>(n_batches) * var_scale;
    const double vm = val_mse();
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(EpochStats{epoch, train_mse, vm, wall});

    if (vm < best_val) {
      best_val = vm;
      best = model;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }

  result.model = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val_mse = best_val;
  return result;
}

std::string history_csv(std::span<const EpochStats> history, bool include_wall) {
  std::string out = include_wall ? "epoch,train_mse,val_mse,wall_seconds\n"
                                 : "epoch,train_mse,val_mse\n";
  char buf[160];
  for (const auto& row : history) {
    if (include_wall)
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.3f\n", row.epoch, row.train_mse,
                    row.val_mse, row.wall_seconds);
    else
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", row.epoch, row.train_mse, row.val_mse);
    out += buf;
  }
  return out;
}

void write_history_csv(std::span<const EpochStats> history, const std::string& path,
                       bool include_wall) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open history file for writing: " + path);
  out << history_csv(history, include_wall);
}

GradCheckResult grad_check_against(const MignModel& model, const Sample& sample,
                                   const LatentSpace* shared, const MignModel& grads,
                                   double eps, std::size_t min_params, std::uint64_t seed,
                                   Exec ex) {
  MignModel probe = model;  // perturbed copy; the input model stays untouched
  LatentSpace local_latent;
  const LatentSpace* latent = shared;
  if (!model.cfg.use_mesh) {
    local_latent = latent_for_sample(model, sample, nullptr, ex);
    latent = &local_latent;
  }

  const Sample* batch[1] = {&sample};
  auto loss_at = [&]() {
    return batch_loss_impl(probe, std::span<const Sample* const>(batch, 1), latent, ex);
  };

  const auto params = parameter_tensors(probe);
  const auto gs = parameter_tensors(grads);
  std::size_t total = 0;
  for (const auto& t : params) total += t.size;

  Rng rng(seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::size_t quota =
        std::max<std::size_t>(1, (min_params * params[t].size + total - 1) / total);
    const std::size_t n_probe = std::min(quota, params[t].size);
    for (std::size_t q = 0; q < n_probe; ++q) {
      const std::size_t idx = params[t].size <= quota ? q : rng.index(params[t].size);
      double& theta = params[t].data[idx];
      const double saved = theta;
      theta = saved + eps;
      const double lp = loss_at();
      theta = saved - eps;
      const double lm = loss_at();
      theta = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double ga = gs[t].data[idx];
      const double denom = std::max({1e-8, std::abs(ga), std::abs(fd)});
      const double rel = std::abs(ga - fd) / denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = params[t].name;
        result.worst_index = idx;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const MignModel& model, const Sample& sample,
                           const LatentSpace* shared, double eps, std::size_t min_params,
                           std::uint64_t seed, Exec ex) {
  MignModel grads = zeros_like(model);
  const Sample* batch[1] = {&sample};
  loss_and_grad_impl(model, std::span<const Sample* const>(batch, 1), shared, grads, ex);
  return grad_check_against(model, sample, shared, grads, eps, min_params, seed, ex);
}

}  // namespace mign
