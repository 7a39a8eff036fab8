#include "mobsynth/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "mobsynth/errors.hpp"
#include "mobsynth/io.hpp"

namespace mobsynth::nn {
namespace {

constexpr std::string_view kMagic = "MSYNCKPT";

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw FormatError("truncated checkpoint");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += sizeof(T);
  return value;
}

nlohmann::json meta_to_json(const TrainingMetadata& m) {
  return {{"epochs_run", m.epochs_run},       {"final_loss", m.final_loss},
          {"epoch_losses", m.epoch_losses},   {"seed", m.seed},
          {"learning_rate", m.learning_rate}, {"batch_size", m.batch_size},
          {"trajectory_length", m.trajectory_length}};
}

TrainingMetadata meta_from_json(const nlohmann::json& j) {
  TrainingMetadata m;
  m.epochs_run = j.at("epochs_run").get<int>();
  m.final_loss = j.at("final_loss").get<double>();
  m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.batch_size = j.at("batch_size").get<int>();
  m.trajectory_length = j.at("trajectory_length").get<int>();
  return m;
}

}  // namespace

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint) {
  nlohmann::json header;
  header["format"] = "mobsynth-checkpoint";
  header["version"] = kCheckpointVersion;
  header["dtype"] = "float32-le";
  header["config"] = checkpoint.config.to_json();
  header["training"] = meta_to_json(checkpoint.meta);
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : checkpoint.params.blocks())
    blocks.push_back({{"name", b.name}, {"rows", b.value->rows()}, {"cols", b.value->cols()}});
  header["blocks"] = blocks;
  const std::string header_text = header.dump();

  std::string out(kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& b : checkpoint.params.blocks()) {
    // Column-major element order, matching Eigen's storage.
    const float* data = b.value->data();
    for (Eigen::Index i = 0; i < b.value->size(); ++i) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(data[i]));
  }
  return out;
}

ModelCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("not a mobsynth checkpoint");
  std::size_t pos = kMagic.size();
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw FormatError("truncated checkpoint header");
  const auto header = nlohmann::json::parse(bytes.substr(pos, header_len));
  pos += header_len;

  ModelCheckpoint ck;
  ck.config = ModelConfig::from_json(header.at("config"));
  ck.meta = meta_from_json(header.at("training"));
  ck.params = Parameters<float>::zeros(ck.config);
  auto blocks = ck.params.blocks();
  const auto& described = header.at("blocks");
  if (described.size() != blocks.size()) throw FormatError("checkpoint block count mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& d = described[i];
    if (d.at("name").get<std::string>() != blocks[i].name ||
        d.at("rows").get<Eigen::Index>() != blocks[i].value->rows() ||
        d.at("cols").get<Eigen::Index>() != blocks[i].value->cols())
      throw FormatError("checkpoint block '" + blocks[i].name + "' does not match the config");
    float* data = blocks[i].value->data();
    for (Eigen::Index k = 0; k < blocks[i].value->size(); ++k)
      data[k] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos));
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  io::write_atomic(path, serialize_checkpoint(checkpoint));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace mobsynth::nn
