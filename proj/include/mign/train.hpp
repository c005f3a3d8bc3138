#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mign/model.hpp"
#include "mign/snapshot.hpp"

namespace mign {

// Metric forms: mean over elements.
double mse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);
// Sum-of-squares form of the training objective.
double sse(std::span<const double> pred, std::span<const double> truth);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 4;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

// Latent node set for a sample: the shared mesh latent, or one built from
// the sample's own input stations when the mesh is disabled.
LatentSpace latent_for_sample(const MignModel& model, const Sample& sample,
                              const LatentSpace* shared, Exec ex = default_exec());

// Mean over batch elements of the per-element-mean squared error, in
// normalized units.
double batch_loss(const MignModel& model, std::span<const Sample> batch,
                  const LatentSpace* shared, Exec ex = default_exec());

// Loss plus gradients with respect to every parameter tensor, accumulated
// into `grads` (shape-congruent with the model; see zeros_like).
double loss_and_grad(const MignModel& model, std::span<const Sample> batch,
                     const LatentSpace* shared, MignModel& grads, Exec ex = default_exec());

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

AdamState make_adam_state(const MignModel& model);

// Standard Adam with beta1 0.9, beta2 0.999, eps 1e-8 and bias-corrected
// moments. Refuses the step on non-finite gradients.
void adam_step(MignModel& model, const MignModel& grads, AdamState& state, double lr);

struct EpochStats {
  int epoch;
  double train_mse;  // denormalized units
  double val_mse;    // denormalized units
  double wall_seconds;
};

struct TrainResult {
  MignModel model;  // best-validation parameters
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_mse = 0.0;
};

// Epoch loop over shuffled samples with early stopping on validation MSE.
TrainResult train(const TrainConfig& tcfg, const ModelConfig& mcfg, const Dataset& train_data,
                  const Dataset& val_data, Exec ex = default_exec());

// CSV emission: epoch,train_mse,val_mse,wall_seconds. Wall seconds can be
// omitted to compare runs byte-for-byte.
void write_history_csv(std::span<const EpochStats> history, const std::string& path,
                       bool include_wall = true);
std::string history_csv(std::span<const EpochStats> history, bool include_wall = true);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
};

// Central-difference check of a provided gradient set over >= min_params
// sampled parameters spread across every tensor. Relative errors use a
// denominator floored at 1e-8.
GradCheckResult grad_check_against(const MignModel& model, const Sample& sample,
                                   const LatentSpace* shared, const MignModel& grads,
                                   double eps, std::size_t min_params, std::uint64_t seed,
                                   Exec ex = default_exec());

// Computes the analytic gradients first, then checks them.
GradCheckResult grad_check(const MignModel& model, const Sample& sample,
                           const LatentSpace* shared, double eps = 1e-5,
                           std::size_t min_params = 200, std::uint64_t seed = 0,
                           Exec ex = default_exec());

}  // namespace mign
