#include "exf/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "exf/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace exf {

namespace {
constexpr char kMagic[4] = {'E', 'X', 'F', 'C'};
constexpr int kFormatVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model,
                     const nlohmann::json& metadata) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["layer_dims"] = model.layer_dims;
  header["activation"] = "relu_hidden_identity_output";
  header["param_count"] = model.param_count();
  header["metadata"] = metadata;
  std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  std::uint32_t len = static_cast<std::uint32_t>(header_bytes.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  out.write(reinterpret_cast<const char*>(model.params.data()),
            static_cast<std::streamsize>(model.params.size() * sizeof(double)));
  if (!out) throw Error("short write for checkpoint: " + path.string());
}

std::pair<MlpModel, nlohmann::json> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError(path.string() + ": bad checkpoint magic, expected EXFC");
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), 4) || len == 0)
    throw ParseError(path.string() + ": bad header length");
  std::string header_bytes(len, '\0');
  if (!in.read(header_bytes.data(), len))
    throw ParseError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": header is not valid JSON: " + e.what());
  }
  if (header.value("format_version", -1) != kFormatVersion)
    throw ParseError(path.string() + ": unsupported checkpoint format version");

  MlpModel model;
  model.layer_dims = header.at("layer_dims").get<std::vector<std::size_t>>();
  if (model.layer_dims.size() < 2)
    throw ParseError(path.string() + ": invalid layer dims");
  std::size_t count = mlp_param_count(model.layer_dims);
  if (header.at("param_count").get<std::size_t>() != count)
    throw ParseError(path.string() + ": param count does not match layer dims");
  model.params.resize(count);
  if (!in.read(reinterpret_cast<char*>(model.params.data()),
               static_cast<std::streamsize>(count * sizeof(double))))
    throw ParseError(path.string() + ": truncated parameter blob");
  return {std::move(model), header.value("metadata", nlohmann::json::object())};
}

void save_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write train log: " + path.string());
  for (const EpochRecord& rec : log.records) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["mean_loss"] = rec.mean_loss;
    j["lr"] = rec.lr;
    if (rec.has_wall_time) j["wall_seconds"] = rec.wall_seconds;
    out << j.dump() << "\n";
  }
}

}  // namespace exf
