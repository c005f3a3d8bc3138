#include "mign/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mign/errors.hpp"
#include "mign/sh.hpp"

namespace mign {

Agg agg_from_string(const std::string& s) {
  if (s == "mean") return Agg::mean;
  if (s == "sum") return Agg::sum;
  if (s == "max") return Agg::max;
  throw ConfigError("unknown aggregation: " + s);
}

std::string to_string(Agg a) {
  switch (a) {
    case Agg::mean: return "mean";
    case Agg::sum: return "sum";
    case Agg::max: return "max";
  }
  return "mean";
}

DecoderLocation decoder_location_from_string(const std::string& s) {
  if (s == "sh") return DecoderLocation::sh;
  if (s == "raw") return DecoderLocation::raw;
  if (s == "none") return DecoderLocation::none;
  throw ConfigError("unknown decoder location mode: " + s);
}

std::string to_string(DecoderLocation d) {
  switch (d) {
    case DecoderLocation::sh: return "sh";
    case DecoderLocation::raw: return "raw";
    case DecoderLocation::none: return "none";
  }
  return "sh";
}

std::size_t ModelConfig::basis_size() const { return sh_basis_size(sh_degree); }

std::size_t ModelConfig::encoder_in() const {
  return 1 + (encoder_sh ? basis_size() : 0);
}

std::size_t ModelConfig::proc_in_width() const {
  return static_cast<std::size_t>(hidden) + (processor_sh ? basis_size() : 0);
}

std::size_t ModelConfig::proc_out_width() const {
  return proc_layers >= 1 ? static_cast<std::size_t>(hidden) : proc_in_width();
}

std::size_t ModelConfig::decoder_loc_width() const {
  switch (decoder_location) {
    case DecoderLocation::sh: return basis_size();
    case DecoderLocation::raw: return 2;
    case DecoderLocation::none: return 0;
  }
  return 0;
}

std::size_t ModelConfig::decoder_in() const { return proc_out_width() + decoder_loc_width(); }

void ModelConfig::validate() const {
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (proc_layers < 0) throw ConfigError("processor layer count must be >= 0");
  if (mlp_hidden_layers < 0) throw ConfigError("mlp hidden layer count must be >= 0");
  if (k_station_mesh < 1 || k_mesh_mesh < 1) throw ConfigError("neighbor counts must be >= 1");
  if (input_steps < 1 || output_steps < 1) throw ConfigError("step counts must be >= 1");
  sh_basis_size(sh_degree);
  if (use_mesh) mesh_node_count(mesh_level);
}

LatentSpace make_latent_space(const HealpixMesh& mesh, const ModelConfig& cfg, Exec ex) {
  LatentSpace ls;
  ls.nodes = mesh.nodes;
  ls.graph = mesh_graph(mesh, cfg.k_mesh_mesh, ex);
  ls.graph_t = transpose(ls.graph);
  ls.basis = sh_basis(std::span<const GeoCoord>(ls.nodes), cfg.sh_degree, ex);
  return ls;
}

LatentSpace make_latent_space(std::span<const GeoCoord> nodes, const ModelConfig& cfg, Exec ex) {
  LatentSpace ls;
  ls.nodes.assign(nodes.begin(), nodes.end());
  ls.graph = knn_graph(ls.nodes, cfg.k_mesh_mesh, ex);
  ls.graph_t = transpose(ls.graph);
  ls.basis = sh_basis(std::span<const GeoCoord>(ls.nodes), cfg.sh_degree, ex);
  return ls;
}

MignModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  MignModel m;
  m.cfg = cfg;
  const std::size_t h = cfg.hidden;
  m.encoder = make_mlp(cfg.encoder_in(), h, h, cfg.mlp_hidden_layers, cfg.act, rng);
  std::size_t w = cfg.proc_in_width();
  for (int l = 0; l < cfg.proc_layers; ++l) {
    const std::size_t msg_in = 2 * w + (cfg.edge_distance ? 1 : 0);
    m.proc_msg.push_back(make_mlp(msg_in, h, h, cfg.mlp_hidden_layers, cfg.act, rng));
    m.proc_update.push_back(make_mlp(w + h, h, h, cfg.mlp_hidden_layers, cfg.act, rng));
    w = h;
  }
  m.decoder = make_mlp(cfg.decoder_in(), h, 1, cfg.mlp_hidden_layers, cfg.act, rng);
  const std::size_t b = cfg.basis_size();
  if (cfg.encoder_sh) m.sh_enc.assign(b, 1.0);
  if (cfg.processor_sh) m.sh_proc.assign(b, 1.0);
  if (cfg.decoder_location == DecoderLocation::sh) m.sh_dec.assign(b, 1.0);
  if (cfg.multistep()) {
    const std::size_t wl = cfg.proc_out_width();
    m.temporal_proj = Matrix(cfg.output_steps * wl, cfg.input_steps * wl);
    const double a = 1.0 / std::sqrt(static_cast<double>(cfg.input_steps * wl));
    for (double& v : m.temporal_proj.flat()) v = rng.uniform(-a, a);
  }
  return m;
}

MignModel zeros_like(const MignModel& m) {
  MignModel z;
  z.cfg = m.cfg;
  z.encoder = zeros_like(m.encoder);
  for (const auto& p : m.proc_msg) z.proc_msg.push_back(zeros_like(p));
  for (const auto& p : m.proc_update) z.proc_update.push_back(zeros_like(p));
  z.decoder = zeros_like(m.decoder);
  z.sh_enc.assign(m.sh_enc.size(), 0.0);
  z.sh_proc.assign(m.sh_proc.size(), 0.0);
  z.sh_dec.assign(m.sh_dec.size(), 0.0);
  z.temporal_proj = Matrix(m.temporal_proj.rows(), m.temporal_proj.cols());
  return z;
}

namespace {

void add_mlp_tensors(std::vector<TensorRef>& out, const std::string& prefix, Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto& layer = mlp.layers[l];
    out.push_back({prefix + "." + std::to_string(l) + ".w", layer.w.data(), layer.w.size()});
    out.push_back({prefix + "." + std::to_string(l) + ".b", layer.b.data(), layer.b.size()});
  }
}

}  // namespace

std::vector<TensorRef> parameter_tensors(MignModel& m) {
  std::vector<TensorRef> out;
  add_mlp_tensors(out, "encoder", m.encoder);
  for (std::size_t l = 0; l < m.proc_msg.size(); ++l) {
    add_mlp_tensors(out, "proc." + std::to_string(l) + ".msg", m.proc_msg[l]);
    add_mlp_tensors(out, "proc." + std::to_string(l) + ".upd", m.proc_update[l]);
  }
  add_mlp_tensors(out, "decoder", m.decoder);
  if (!m.sh_enc.empty()) out.push_back({"sh_encoder", m.sh_enc.data(), m.sh_enc.size()});
  if (!m.sh_proc.empty()) out.push_back({"sh_processor", m.sh_proc.data(), m.sh_proc.size()});
  if (!m.sh_dec.empty()) out.push_back({"sh_decoder", m.sh_dec.data(), m.sh_dec.size()});
  if (!m.temporal_proj.empty())
    out.push_back({"temporal_proj", m.temporal_proj.data(), m.temporal_proj.size()});
  return out;
}

std::size_t parameter_count(const MignModel& m) {
  std::size_t n = 0;
  for (const auto& t : parameter_tensors(m)) n += t.size;
  return n;
}

// ---------------------------------------------------------------------------
// Aggregation kernels. Within a target, edges are stored in ascending source
// order and summed in storage order; max ties keep the first edge.

namespace {

void aggregate(const EdgeList& edges, const Matrix& rows, bool rows_by_edge, Agg agg,
               Matrix& out, std::vector<std::uint32_t>* argmax, Exec ex) {
  const std::size_t cols = rows.cols();
  out = Matrix(edges.n_targets, cols);
  if (agg == Agg::max && argmax) argmax->assign(edges.n_targets * cols, 0);
  parallel_for(edges.n_targets, ex, [&](std::size_t t) {
    double* o = out.row(t);
    const std::size_t lo = edges.offsets[t], hi = edges.offsets[t + 1];
    if (agg == Agg::max) {
      const double* r0 = rows.row(rows_by_edge ? lo : edges.src[lo]);
      for (std::size_t c = 0; c < cols; ++c) {
        o[c] = r0[c];
        if (argmax) (*argmax)[t * cols + c] = static_cast<std::uint32_t>(lo);
      }
      for (std::size_t e = lo + 1; e < hi; ++e) {
        const double* r = rows.row(rows_by_edge ? e : edges.src[e]);
        for (std::size_t c = 0; c < cols; ++c) {
          if (r[c] > o[c]) {
            o[c] = r[c];
            if (argmax) (*argmax)[t * cols + c] = static_cast<std::uint32_t>(e);
          }
        }
      }
      return;
    }
    for (std::size_t e = lo; e < hi; ++e) {
      const double* r = rows.row(rows_by_edge ? e : edges.src[e]);
      for (std::size_t c = 0; c < cols; ++c) o[c] += r[c];
    }
    if (agg == Agg::mean) {
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t c = 0; c < cols; ++c) o[c] *= inv;
    }
  });
}

// Adjoint of source-indexed aggregation; each source row owns its own
// accumulation over the transpose lists.
void aggregate_backward_to_sources(const EdgeList& edges, const EdgeListTranspose& tr,
                                   const Matrix& d_out, Agg agg,
                                   const std::vector<std::uint32_t>& argmax, Matrix& d_rows,
                                   Exec ex) {
  const std::size_t cols = d_out.cols();
  d_rows = Matrix(edges.n_sources, cols);
  parallel_for(edges.n_sources, ex, [&](std::size_t s) {
    double* dr = d_rows.row(s);
    for (std::size_t p = tr.offsets[s]; p < tr.offsets[s + 1]; ++p) {
      const std::size_t e = tr.edge_pos[p];
      const std::size_t t = tr.tgt[p];
      const double* dt = d_out.row(t);
      switch (agg) {
        case Agg::mean: {
          const double w = 1.0 / static_cast<double>(edges.degree(t));
          for (std::size_t c = 0; c < cols; ++c) dr[c] += w * dt[c];
          break;
        }
        case Agg::sum:
          for (std::size_t c = 0; c < cols; ++c) dr[c] += dt[c];
          break;
        case Agg::max:
          for (std::size_t c = 0; c < cols; ++c)
            if (argmax[t * cols + c] == e) dr[c] += dt[c];
          break;
      }
    }
  });
}

// Adjoint of edge-indexed aggregation; each edge row is written exactly once.
void aggregate_backward_to_edges(const EdgeList& edges, const Matrix& d_out, Agg agg,
                                 const std::vector<std::uint32_t>& argmax, Matrix& d_edges,
                                 Exec ex) {
  const std::size_t cols = d_out.cols();
  d_edges = Matrix(edges.edge_count(), cols);
  parallel_for(edges.n_targets, ex, [&](std::size_t t) {
    const std::size_t lo = edges.offsets[t], hi = edges.offsets[t + 1];
    const double* dt = d_out.row(t);
    const double w = agg == Agg::mean ? 1.0 / static_cast<double>(hi - lo) : 1.0;
    for (std::size_t e = lo; e < hi; ++e) {
      double* de = d_edges.row(e);
      if (agg == Agg::max) {
        for (std::size_t c = 0; c < cols; ++c)
          de[c] = argmax[t * cols + c] == e ? dt[c] : 0.0;
      } else {
        for (std::size_t c = 0; c < cols; ++c) de[c] = w * dt[c];
      }
    }
  });
}

// d_nodes[src(e)] += d_edge_rows[e][col_lo .. col_lo+width)
void scatter_edge_cols_to_sources(const EdgeList& edges, const EdgeListTranspose& tr,
                                  const Matrix& d_edge_rows, std::size_t col_lo,
                                  std::size_t width, Matrix& d_nodes, Exec ex) {
  parallel_for(edges.n_sources, ex, [&](std::size_t s) {
    double* dn = d_nodes.row(s);
    for (std::size_t p = tr.offsets[s]; p < tr.offsets[s + 1]; ++p) {
      const double* de = d_edge_rows.row(tr.edge_pos[p]);
      for (std::size_t c = 0; c < width; ++c) dn[c] += de[col_lo + c];
    }
  });
}

// d_nodes[t] += sum over in-edges of d_edge_rows[e][col_lo .. col_lo+width)
void scatter_edge_cols_to_targets(const EdgeList& edges, const Matrix& d_edge_rows,
                                  std::size_t col_lo, std::size_t width, Matrix& d_nodes,
                                  Exec ex) {
  parallel_for(edges.n_targets, ex, [&](std::size_t t) {
    double* dn = d_nodes.row(t);
    for (std::size_t e = edges.offsets[t]; e < edges.offsets[t + 1]; ++e) {
      const double* de = d_edge_rows.row(e);
      for (std::size_t c = 0; c < width; ++c) dn[c] += de[col_lo + c];
    }
  });
}

// grad_w[b] += sum over rows of basis(i, b) * d(i, col_lo + b)
void accumulate_sh_grad(const Matrix& basis, const Matrix& d, std::size_t col_lo,
                        std::span<double> grad_w, Exec ex) {
  const std::size_t n = basis.rows();
  parallel_for(grad_w.size(), ex, [&](std::size_t b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += basis(i, b) * d(i, col_lo + b);
    grad_w[b] += acc;
  });
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix encode(const StationSnapshot& snap, const LatentSpace& latent, const MignModel& model,
              EncodeTrace* trace, Exec ex) {
  if (snap.size() == 0) throw DataError("encode: empty snapshot");
  if (snap.coords.size() != snap.values.size())
    throw ShapeError("encode: snapshot coordinate/value lengths differ");
  const ModelConfig& cfg = model.cfg;
  const std::size_t n_stations = snap.size();

  EdgeList edges = knn_edges(snap.coords, latent.nodes, cfg.k_station_mesh, ex);

  Matrix enc_in(n_stations, cfg.encoder_in());
  Matrix station_basis;
  if (cfg.encoder_sh) {
    station_basis = sh_basis(std::span<const GeoCoord>(snap.coords), cfg.sh_degree, ex);
    const std::size_t b = cfg.basis_size();
    parallel_for(n_stations, ex, [&](std::size_t i) {
      double* r = enc_in.row(i);
      r[0] = snap.values[i];
      const double* br = station_basis.row(i);
      for (std::size_t j = 0; j < b; ++j) r[1 + j] = model.sh_enc[j] * br[j];
    });
  } else {
    parallel_for(n_stations, ex, [&](std::size_t i) { enc_in(i, 0) = snap.values[i]; });
  }

  Matrix msg = mlp_forward(model.encoder, enc_in, trace ? &trace->mlp : nullptr, ex);
  Matrix h0;
  aggregate(edges, msg, /*rows_by_edge=*/false, cfg.agg, h0, trace ? &trace->argmax : nullptr,
            ex);

  if (trace) {
    trace->edges_t = transpose(edges);
    trace->edges = std::move(edges);
    trace->station_basis = std::move(station_basis);
    trace->enc_in = std::move(enc_in);
    trace->station_msg = std::move(msg);
  }
  return h0;
}

Matrix process(const Matrix& h0, const LatentSpace& latent, const MignModel& model,
               ProcessTrace* trace, Exec ex) {
  const ModelConfig& cfg = model.cfg;
  const std::size_t n_nodes = latent.nodes.size();
  if (h0.rows() != n_nodes) throw ShapeError("process: state row count != latent node count");
  if (h0.cols() != static_cast<std::size_t>(cfg.hidden))
    throw ShapeError("process: state width != hidden width");

  Matrix state(n_nodes, cfg.proc_in_width());
  const std::size_t h = cfg.hidden, b = cfg.basis_size();
  parallel_for(n_nodes, ex, [&](std::size_t i) {
    double* r = state.row(i);
    const double* hr = h0.row(i);
    for (std::size_t c = 0; c < h; ++c) r[c] = hr[c];
    if (cfg.processor_sh) {
      const double* br = latent.basis.row(i);
      for (std::size_t j = 0; j < b; ++j) r[h + j] = model.sh_proc[j] * br[j];
    }
  });
  if (trace) {
    trace->states.clear();
    trace->layers.clear();
    trace->states.reserve(cfg.proc_layers + 1);
    trace->layers.reserve(cfg.proc_layers);
    trace->states.push_back(state);
  }

  const EdgeList& graph = latent.graph;
  const std::size_t n_edges = graph.edge_count();
  for (int l = 0; l < cfg.proc_layers; ++l) {
    const std::size_t w = state.cols();
    const std::size_t extra = cfg.edge_distance ? 1 : 0;
    Matrix edge_in(n_edges, 2 * w + extra);
    parallel_for(graph.n_targets, ex, [&](std::size_t t) {
      const double* rt = state.row(t);
      for (std::size_t e = graph.offsets[t]; e < graph.offsets[t + 1]; ++e) {
        double* r = edge_in.row(e);
        const double* rs = state.row(graph.src[e]);
        for (std::size_t c = 0; c < w; ++c) r[c] = rs[c];
        for (std::size_t c = 0; c < w; ++c) r[w + c] = rt[c];
        if (extra) r[2 * w] = graph.dist[e];
      }
    });

    ProcessLayerTrace* lt = nullptr;
    if (trace) {
      trace->layers.emplace_back();
      lt = &trace->layers.back();
    }
    Matrix edge_msg =
        mlp_forward(model.proc_msg[l], edge_in, lt ? &lt->msg_mlp : nullptr, ex);
    Matrix agg_msg;
    aggregate(graph, edge_msg, /*rows_by_edge=*/true, cfg.agg, agg_msg,
              lt ? &lt->argmax : nullptr, ex);

    Matrix upd_in(n_nodes, w + h);
    parallel_for(n_nodes, ex, [&](std::size_t i) {
      double* r = upd_in.row(i);
      const double* sr = state.row(i);
      const double* ar = agg_msg.row(i);
      for (std::size_t c = 0; c < w; ++c) r[c] = sr[c];
      for (std::size_t c = 0; c < h; ++c) r[w + c] = ar[c];
    });
    Matrix next = mlp_forward(model.proc_update[l], upd_in, lt ? &lt->upd_mlp : nullptr, ex);

    if (lt) {
      lt->edge_in = std::move(edge_in);
      lt->edge_msg = std::move(edge_msg);
      lt->agg = std::move(agg_msg);
      lt->upd_in = std::move(upd_in);
    }
    state = std::move(next);
    if (trace) trace->states.push_back(state);
  }
  return state;
}

std::vector<double> decode(const Matrix& h_final, std::span<const GeoCoord> targets,
                           const LatentSpace& latent, const MignModel& model,
                           DecodeTrace* trace, Exec ex) {
  if (targets.empty()) throw DataError("decode: empty target list");
  const ModelConfig& cfg = model.cfg;
  const std::size_t n_nodes = latent.nodes.size();
  if (h_final.rows() != n_nodes) throw ShapeError("decode: state row count != latent node count");
  if (h_final.cols() != cfg.proc_out_width())
    throw ShapeError("decode: state width mismatch");

  const std::size_t w = h_final.cols(), b = cfg.basis_size();
  Matrix dec_in(n_nodes, cfg.decoder_in());
  parallel_for(n_nodes, ex, [&](std::size_t i) {
    double* r = dec_in.row(i);
    const double* hr = h_final.row(i);
    for (std::size_t c = 0; c < w; ++c) r[c] = hr[c];
    switch (cfg.decoder_location) {
      case DecoderLocation::sh: {
        const double* br = latent.basis.row(i);
        for (std::size_t j = 0; j < b; ++j) r[w + j] = model.sh_dec[j] * br[j];
        break;
      }
      case DecoderLocation::raw:
        r[w] = latent.nodes[i].lon;
        r[w + 1] = latent.nodes[i].lat;
        break;
      case DecoderLocation::none: break;
    }
  });

  Matrix node_msg = mlp_forward(model.decoder, dec_in, trace ? &trace->mlp : nullptr, ex);
  EdgeList edges = knn_edges(latent.nodes, targets, cfg.k_station_mesh, ex);
  Matrix pred_mat;
  aggregate(edges, node_msg, /*rows_by_edge=*/false, cfg.agg, pred_mat,
            trace ? &trace->argmax : nullptr, ex);

  std::vector<double> preds(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) preds[t] = pred_mat(t, 0);

  if (trace) {
    trace->edges_t = transpose(edges);
    trace->edges = std::move(edges);
    trace->dec_in = std::move(dec_in);
    trace->node_msg = std::move(node_msg);
  }
  return preds;
}

std::vector<double> forward(const StationSnapshot& snap, std::span<const GeoCoord> targets,
                            const LatentSpace& latent, const MignModel& model, Exec ex) {
  Matrix h0 = encode(snap, latent, model, nullptr, ex);
  Matrix hl = process(h0, latent, model, nullptr, ex);
  return decode(hl, targets, latent, model, nullptr, ex);
}

std::vector<std::vector<double>> temporal_forward(std::span<const StationSnapshot> inputs,
                                                  std::span<const std::vector<GeoCoord>> target_sets,
                                                  const LatentSpace& latent,
                                                  const MignModel& model, Exec ex) {
  ForwardTrace trace;
  return forward_with_trace(inputs, target_sets, latent, model, trace, ex);
}

std::vector<std::vector<double>> forward_with_trace(std::span<const StationSnapshot> inputs,
                                                    std::span<const std::vector<GeoCoord>> target_sets,
                                                    const LatentSpace& latent,
                                                    const MignModel& model, ForwardTrace& trace,
                                                    Exec ex) {
  const ModelConfig& cfg = model.cfg;
  if (inputs.size() != static_cast<std::size_t>(cfg.input_steps))
    throw ShapeError("forward: expected " + std::to_string(cfg.input_steps) + " input steps");
  if (target_sets.size() != static_cast<std::size_t>(cfg.output_steps))
    throw ShapeError("forward: expected " + std::to_string(cfg.output_steps) + " target sets");

  trace = ForwardTrace{};
  trace.steps.reserve(inputs.size());
  trace.outs.reserve(target_sets.size());
  const std::size_t n_nodes = latent.nodes.size();
  const std::size_t w = cfg.proc_out_width();

  std::vector<Matrix> step_states;
  step_states.reserve(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    trace.steps.emplace_back();
    auto& st = trace.steps.back();
    Matrix h0 = encode(inputs[s], latent, model, &st.enc, ex);
    step_states.push_back(process(h0, latent, model, &st.proc, ex));
  }

  std::vector<Matrix> out_states;
  if (!model.temporal_proj.empty()) {
    if (model.temporal_proj.rows() != w * target_sets.size() ||
        model.temporal_proj.cols() != w * inputs.size())
      throw ShapeError("forward: temporal projection shape mismatch");
    Matrix concat(n_nodes, w * inputs.size());
    parallel_for(n_nodes, ex, [&](std::size_t i) {
      double* r = concat.row(i);
      for (std::size_t s = 0; s < step_states.size(); ++s) {
        const double* sr = step_states[s].row(i);
        for (std::size_t c = 0; c < w; ++c) r[s * w + c] = sr[c];
      }
    });
    Matrix projected;
    matmul_abt(concat, model.temporal_proj, projected, ex);
    for (std::size_t j = 0; j < target_sets.size(); ++j) {
      Matrix slice(n_nodes, w);
      parallel_for(n_nodes, ex, [&](std::size_t i) {
        const double* pr = projected.row(i);
        double* sr = slice.row(i);
        for (std::size_t c = 0; c < w; ++c) sr[c] = pr[j * w + c];
      });
      out_states.push_back(std::move(slice));
    }
    trace.concat = std::move(concat);
    trace.projected = true;
  } else {
    if (cfg.multistep())
      throw ShapeError("forward: multistep configuration without a temporal projection");
    out_states.push_back(std::move(step_states.front()));
  }

  std::vector<std::vector<double>> preds;
  for (std::size_t j = 0; j < target_sets.size(); ++j) {
    trace.outs.emplace_back();
    preds.push_back(
        decode(out_states[j], target_sets[j], latent, model, &trace.outs[j].dec, ex));
  }
  return preds;
}

void backward(const MignModel& model, const LatentSpace& latent, const ForwardTrace& trace,
              std::span<const std::vector<double>> d_preds, MignModel& grads, Exec ex) {
  const ModelConfig& cfg = model.cfg;
  const std::size_t n_nodes = latent.nodes.size();
  const std::size_t w = cfg.proc_out_width();

  // Decoder stages, one per output step.
  std::vector<Matrix> d_states(trace.outs.size());
  for (std::size_t j = 0; j < trace.outs.size(); ++j) {
    const DecodeTrace& dt = trace.outs[j].dec;
    Matrix d_pred(d_preds[j].size(), 1);
    for (std::size_t i = 0; i < d_preds[j].size(); ++i) d_pred(i, 0) = d_preds[j][i];

    Matrix d_node_msg;
    aggregate_backward_to_sources(dt.edges, dt.edges_t, d_pred, cfg.agg, dt.argmax, d_node_msg,
                                  ex);
    Matrix d_dec_in = mlp_backward(model.decoder, dt.mlp, d_node_msg, grads.decoder, ex);

    d_states[j] = Matrix(n_nodes, w);
    parallel_for(n_nodes, ex, [&](std::size_t i) {
      const double* dr = d_dec_in.row(i);
      double* sr = d_states[j].row(i);
      for (std::size_t c = 0; c < w; ++c) sr[c] = dr[c];
    });
    if (cfg.decoder_location == DecoderLocation::sh)
      accumulate_sh_grad(latent.basis, d_dec_in, w, grads.sh_dec, ex);
  }

  // Temporal projection.
  std::vector<Matrix> d_step_states;
  if (trace.projected) {
    Matrix d_projected(n_nodes, w * trace.outs.size());
    parallel_for(n_nodes, ex, [&](std::size_t i) {
      double* pr = d_projected.row(i);
      for (std::size_t j = 0; j < trace.outs.size(); ++j) {
        const double* sr = d_states[j].row(i);
        for (std::size_t c = 0; c < w; ++c) pr[j * w + c] = sr[c];
      }
    });
    matmul_atb_accum(d_projected, trace.concat, grads.temporal_proj, ex);
    Matrix d_concat;
    matmul_ab(d_projected, model.temporal_proj, d_concat, ex);
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
      Matrix d(n_nodes, w);
      parallel_for(n_nodes, ex, [&](std::size_t i) {
        const double* cr = d_concat.row(i);
        double* dr = d.row(i);
        for (std::size_t c = 0; c < w; ++c) dr[c] = cr[s * w + c];
      });
      d_step_states.push_back(std::move(d));
    }
  } else {
    d_step_states.push_back(std::move(d_states[0]));
  }

  // Processor and encoder stages, one per input step.
  const std::size_t h = cfg.hidden;
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& st = trace.steps[s];
    Matrix d_state = std::move(d_step_states[s]);

    for (int l = cfg.proc_layers; l-- > 0;) {
      const ProcessLayerTrace& lt = st.proc.layers[l];
      const std::size_t wl = st.proc.states[l].cols();

      Matrix d_upd_in =
          mlp_backward(model.proc_update[l], lt.upd_mlp, d_state, grads.proc_update[l], ex);
      Matrix d_prev(n_nodes, wl);
      Matrix d_agg(n_nodes, h);
      parallel_for(n_nodes, ex, [&](std::size_t i) {
        const double* dr = d_upd_in.row(i);
        double* pp = d_prev.row(i);
        double* aa = d_agg.row(i);
        for (std::size_t c = 0; c < wl; ++c) pp[c] = dr[c];
        for (std::size_t c = 0; c < h; ++c) aa[c] = dr[wl + c];
      });

      Matrix d_edge_msg;
      aggregate_backward_to_edges(latent.graph, d_agg, cfg.agg, lt.argmax, d_edge_msg, ex);
      Matrix d_edge_in =
          mlp_backward(model.proc_msg[l], lt.msg_mlp, d_edge_msg, grads.proc_msg[l], ex);

      scatter_edge_cols_to_targets(latent.graph, d_edge_in, wl, wl, d_prev, ex);
      scatter_edge_cols_to_sources(latent.graph, latent.graph_t, d_edge_in, 0, wl, d_prev, ex);
      d_state = std::move(d_prev);
    }

    // Layer 0: split encoder-state and location-embedding adjoints.
    if (cfg.processor_sh)
      accumulate_sh_grad(latent.basis, d_state, h, grads.sh_proc, ex);
    Matrix d_h0(n_nodes, h);
    parallel_for(n_nodes, ex, [&](std::size_t i) {
      const double* dr = d_state.row(i);
      double* hr = d_h0.row(i);
      for (std::size_t c = 0; c < h; ++c) hr[c] = dr[c];
    });

    Matrix d_station_msg;
    aggregate_backward_to_sources(st.enc.edges, st.enc.edges_t, d_h0, cfg.agg, st.enc.argmax,
                                  d_station_msg, ex);
    Matrix d_enc_in =
        mlp_backward(model.encoder, st.enc.mlp, d_station_msg, grads.encoder, ex);
    if (cfg.encoder_sh)
      accumulate_sh_grad(st.enc.station_basis, d_enc_in, 1, grads.sh_enc, ex);
  }
}

}  // namespace mign
