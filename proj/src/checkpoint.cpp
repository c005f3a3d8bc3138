#include "mign/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "mign/errors.hpp"

namespace mign {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"mesh_level", c.mesh_level},
                        {"k_station_mesh", c.k_station_mesh},
                        {"k_mesh_mesh", c.k_mesh_mesh},
                        {"sh_degree", c.sh_degree},
                        {"hidden", c.hidden},
                        {"proc_layers", c.proc_layers},
                        {"mlp_hidden_layers", c.mlp_hidden_layers},
                        {"activation", to_string(c.act)},
                        {"aggregation", to_string(c.agg)},
                        {"encoder_sh", c.encoder_sh},
                        {"processor_sh", c.processor_sh},
                        {"decoder_location", to_string(c.decoder_location)},
                        {"use_mesh", c.use_mesh},
                        {"edge_distance", c.edge_distance},
                        {"input_steps", c.input_steps},
                        {"output_steps", c.output_steps}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.mesh_level = j.at("mesh_level").get<int>();
  c.k_station_mesh = j.at("k_station_mesh").get<int>();
  c.k_mesh_mesh = j.at("k_mesh_mesh").get<int>();
  c.sh_degree = j.at("sh_degree").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.proc_layers = j.at("proc_layers").get<int>();
  c.mlp_hidden_layers = j.at("mlp_hidden_layers").get<int>();
  c.act = activation_from_string(j.at("activation").get<std::string>());
  c.agg = agg_from_string(j.at("aggregation").get<std::string>());
  c.encoder_sh = j.at("encoder_sh").get<bool>();
  c.processor_sh = j.at("processor_sh").get<bool>();
  c.decoder_location = decoder_location_from_string(j.at("decoder_location").get<std::string>());
  c.use_mesh = j.at("use_mesh").get<bool>();
  c.edge_distance = j.at("edge_distance").get<bool>();
  c.input_steps = j.at("input_steps").get<int>();
  c.output_steps = j.at("output_steps").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto tensors = parameter_tensors(ckpt.model);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& t : tensors)
    manifest.push_back({{"name", t.name}, {"size", t.size}});
  // Normalization statistics travel as raw doubles after the header so the
  // round trip stays bit-exact.
  nlohmann::json header{{"config", config_to_json(ckpt.model.cfg)},
                        {"variable", ckpt.variable},
                        {"tensors", manifest}};
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  out.write(reinterpret_cast<const char*>(&ckpt.stats.mean), sizeof(double));
  out.write(reinterpret_cast<const char*>(&ckpt.stats.std), sizeof(double));
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.data),
              static_cast<std::streamsize>(t.size * sizeof(double)));
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion)
    throw DataError("unsupported checkpoint format version " + std::to_string(version));
  const std::uint32_t header_len = read_u32(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw DataError("truncated checkpoint header: " + path);
  const nlohmann::json header = nlohmann::json::parse(header_str);

  Checkpoint ckpt;
  ckpt.variable = header.at("variable").get<std::string>();
  // Shapes derive from the config; seed value is irrelevant, every
  // parameter is overwritten below.
  ckpt.model = make_model(config_from_json(header.at("config")), 0);
  in.read(reinterpret_cast<char*>(&ckpt.stats.mean), sizeof(double));
  in.read(reinterpret_cast<char*>(&ckpt.stats.std), sizeof(double));

  const auto tensors = parameter_tensors(ckpt.model);
  const auto& manifest = header.at("tensors");
  if (manifest.size() != tensors.size())
    throw DataError("checkpoint tensor manifest does not match the configuration");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (manifest[i].at("name").get<std::string>() != tensors[i].name ||
        manifest[i].at("size").get<std::size_t>() != tensors[i].size)
      throw DataError("checkpoint tensor mismatch at " + tensors[i].name);
    in.read(reinterpret_cast<char*>(tensors[i].data),
            static_cast<std::streamsize>(tensors[i].size * sizeof(double)));
  }
  if (!in) throw DataError("truncated checkpoint tensors: " + path);
  return ckpt;
}

}  // namespace mign
