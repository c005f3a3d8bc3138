#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mign/geo.hpp"
#include "mign/healpix.hpp"
#include "mign/mlp.hpp"
#include "mign/snapshot.hpp"
#include "mign/tensor.hpp"

namespace mign {

enum class Agg { mean, sum, max };
enum class DecoderLocation { sh, raw, none };

Agg agg_from_string(const std::string& s);
std::string to_string(Agg a);
DecoderLocation decoder_location_from_string(const std::string& s);
std::string to_string(DecoderLocation d);

struct ModelConfig {
  int mesh_level = 3;
  int k_station_mesh = 10;
  int k_mesh_mesh = 10;
  int sh_degree = 2;
  int hidden = 64;          // H
  int proc_layers = 2;      // L message-passing rounds on the latent graph
  int mlp_hidden_layers = 1;
  Activation act = Activation::silu;
  Agg agg = Agg::mean;
  bool encoder_sh = true;
  bool processor_sh = true;
  DecoderLocation decoder_location = DecoderLocation::sh;
  bool use_mesh = true;      // false: latent nodes are the input stations
  bool edge_distance = false;  // append arc length to processor message inputs
  int input_steps = 1;       // multistep mode when either differs from 1
  int output_steps = 1;

  std::size_t basis_size() const;
  std::size_t encoder_in() const;
  std::size_t proc_in_width() const;   // width of the layer-0 latent state
  std::size_t proc_out_width() const;  // width after the last round
  std::size_t decoder_loc_width() const;
  std::size_t decoder_in() const;
  bool multistep() const { return input_steps != 1 || output_steps != 1; }
  void validate() const;
};

// The latent node set messages are exchanged on: HEALPix pixel centers by
// default, or the input stations themselves when the mesh is disabled.
struct LatentSpace {
  std::vector<GeoCoord> nodes;
  EdgeList graph;
  EdgeListTranspose graph_t;
  Matrix basis;  // |nodes| x (N+1)^2
};

LatentSpace make_latent_space(const HealpixMesh& mesh, const ModelConfig& cfg,
                              Exec ex = default_exec());
LatentSpace make_latent_space(std::span<const GeoCoord> nodes, const ModelConfig& cfg,
                              Exec ex = default_exec());

struct MignModel {
  ModelConfig cfg;
  Mlp encoder;
  std::vector<Mlp> proc_msg;
  std::vector<Mlp> proc_update;
  Mlp decoder;
  std::vector<double> sh_enc;  // per-site spherical-harmonics coefficients
  std::vector<double> sh_proc;
  std::vector<double> sh_dec;
  Matrix temporal_proj;  // (output_steps*W) x (input_steps*W); empty single-step
};

// Seeded initialization: MLP weights uniform fan-in, SH coefficients 1.
MignModel make_model(const ModelConfig& cfg, std::uint64_t seed);

// Same shapes, all parameters zero (gradient / optimizer-state container).
MignModel zeros_like(const MignModel& m);

// Flat view over every parameter tensor, in the fixed order used by the
// checkpoint format and the optimizer.
struct TensorRef {
  std::string name;
  double* data;
  std::size_t size;
};
std::vector<TensorRef> parameter_tensors(MignModel& m);
inline std::vector<TensorRef> parameter_tensors(const MignModel& m) {
  return parameter_tensors(const_cast<MignModel&>(m));
}
std::size_t parameter_count(const MignModel& m);

// ---------------------------------------------------------------------------
// Forward stages. Each optionally records a trace for the backward pass.

struct EncodeTrace {
  EdgeList edges;
  EdgeListTranspose edges_t;
  Matrix station_basis;
  Matrix enc_in;
  MlpTrace mlp;
  Matrix station_msg;
  std::vector<std::uint32_t> argmax;
};

// Station -> latent interpolation: per-station message from the embedded
// value, aggregated at each latent node over its k nearest stations.
Matrix encode(const StationSnapshot& snap, const LatentSpace& latent, const MignModel& model,
              EncodeTrace* trace = nullptr, Exec ex = default_exec());

struct ProcessLayerTrace {
  Matrix edge_in;
  MlpTrace msg_mlp;
  Matrix edge_msg;
  Matrix agg;
  std::vector<std::uint32_t> argmax;
  Matrix upd_in;
  MlpTrace upd_mlp;
};

struct ProcessTrace {
  std::vector<Matrix> states;  // states[l], l = 0..L
  std::vector<ProcessLayerTrace> layers;
};

// Message passing rounds on the latent graph. Layer 0 input is the encoder
// state concatenated with the latent-node location embedding.
Matrix process(const Matrix& h0, const LatentSpace& latent, const MignModel& model,
               ProcessTrace* trace = nullptr, Exec ex = default_exec());

struct DecodeTrace {
  EdgeList edges;
  EdgeListTranspose edges_t;
  Matrix dec_in;
  MlpTrace mlp;
  Matrix node_msg;
  std::vector<std::uint32_t> argmax;
};

// Latent -> station interpolation: scalar message per latent node,
// aggregated at each target over its k nearest latent nodes.
std::vector<double> decode(const Matrix& h_final, std::span<const GeoCoord> targets,
                           const LatentSpace& latent, const MignModel& model,
                           DecodeTrace* trace = nullptr, Exec ex = default_exec());

// decode(process(encode(...))), one prediction per target coordinate.
std::vector<double> forward(const StationSnapshot& snap, std::span<const GeoCoord> targets,
                            const LatentSpace& latent, const MignModel& model,
                            Exec ex = default_exec());

// Multistep head: encode+process each input day, concatenate the latent
// states per node, apply the temporal projection, decode each output slice
// against its own target set.
std::vector<std::vector<double>> temporal_forward(std::span<const StationSnapshot> inputs,
                                                  std::span<const std::vector<GeoCoord>> target_sets,
                                                  const LatentSpace& latent,
                                                  const MignModel& model,
                                                  Exec ex = default_exec());

// ---------------------------------------------------------------------------
// Traced forward + reverse-mode backward used by training.

struct ForwardTrace {
  struct Step {
    EncodeTrace enc;
    ProcessTrace proc;
  };
  std::vector<Step> steps;
  Matrix concat;  // latent states side by side (multistep only)
  bool projected = false;
  struct Out {
    DecodeTrace dec;
  };
  std::vector<Out> outs;
};

std::vector<std::vector<double>> forward_with_trace(std::span<const StationSnapshot> inputs,
                                                    std::span<const std::vector<GeoCoord>> target_sets,
                                                    const LatentSpace& latent,
                                                    const MignModel& model, ForwardTrace& trace,
                                                    Exec ex = default_exec());

// Accumulates parameter gradients for the traced forward into `grads`.
void backward(const MignModel& model, const LatentSpace& latent, const ForwardTrace& trace,
              std::span<const std::vector<double>> d_preds, MignModel& grads,
              Exec ex = default_exec());

}  // namespace mign
