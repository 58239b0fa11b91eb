#include "aord/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <fcntl.h>
#include <unistd.h>

#include "aord/errors.hpp"
#include "aord/rng.hpp"

namespace aord {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'O', 'R', 'D', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos, const std::string& what) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated while reading " + what);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint64_t fnv1a_bytes(std::string_view a, std::string_view b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto s : {a, b}) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

struct Tensor {
  std::string name;
  const Matrix* data;
};

json schedule_json(const NoiseSchedule& s) {
  return {{"train_steps", s.train_steps},
          {"inference_steps", s.inference_steps()},
          {"beta_start", kBetaStart},
          {"beta_end", kBetaEnd},
          {"alpha_bar_final", s.alpha_bar.back()}};
}

json seed_lineage(const RunConfig& cfg) {
  json streams = json::object();
  for (const char* name : {"data", "init", "diffusion-train", "eval"}) {
    streams[name] = stream_seed(cfg.seed, name, 0);
  }
  return {{"master", cfg.seed}, {"derivation", "mix64(mix64(master ^ fnv1a(name)) + index)"}, {"streams", streams}};
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: '" + tmp.string() + "'");
  }
  const int fd = ::open(tmp.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, ModelBundle& bundle,
                     const AdamState& adam, int epochs_done) {
  const ParamRefs params = bundle.all_params();
  const ParamRefs trainable = bundle.trainable_params();
  if (adam.step > 0 && !adam.matches(trainable)) {
    throw std::invalid_argument("checkpoint: Adam state does not match the trainable parameters");
  }

  std::vector<Tensor> tensors;
  for (const Param* p : params) tensors.push_back({p->name, &p->value});
  if (adam.step > 0) {
    for (std::size_t i = 0; i < trainable.size(); ++i) tensors.push_back({"adam.m/" + trainable[i]->name, &adam.m[i]});
    for (std::size_t i = 0; i < trainable.size(); ++i) tensors.push_back({"adam.v/" + trainable[i]->name, &adam.v[i]});
  }

  json directory = json::array();
  std::set<std::string> seen;
  std::string blob;
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) throw std::logic_error("checkpoint: duplicate tensor name " + t.name);
    directory.push_back({{"name", t.name}, {"rows", t.data->rows()}, {"cols", t.data->cols()}, {"offset", blob.size()}});
    const auto n = static_cast<std::size_t>(t.data->size());
    blob.append(reinterpret_cast<const char*>(t.data->data()), n * sizeof(double));
  }

  json meta = {{"format", "aord-checkpoint"},
               {"version", kCheckpointVersion},
               {"artifact_version", kArtifactVersion},
               {"config", to_json(cfg)},
               {"model_hash", model_hash(cfg)},
               {"schedule", schedule_json(bundle.schedule)},
               {"seeds", seed_lineage(cfg)},
               {"epochs_done", epochs_done},
               {"adam", {{"step", adam.step}, {"lr", cfg.lr}}},
               {"tensors", directory}};
  const std::string meta_text = meta.dump();

  std::string bytes(kMagic, sizeof(kMagic));
  put<std::uint32_t>(bytes, kCheckpointVersion);
  put<std::uint64_t>(bytes, meta_text.size());
  bytes += meta_text;
  put<std::uint64_t>(bytes, blob.size());
  bytes += blob;
  put<std::uint64_t>(bytes, fnv1a_bytes(meta_text, blob));
  write_file_atomic(path, bytes);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto meta_len = take<std::uint64_t>(bytes, pos, "metadata length");
  if (meta_len > bytes.size() - pos) throw CheckpointError(path.string() + ": truncated metadata");
  const std::string_view meta_text(bytes.data() + pos, meta_len);
  pos += meta_len;
  const auto blob_len = take<std::uint64_t>(bytes, pos, "blob length");
  if (blob_len > bytes.size() - pos || blob_len % sizeof(double) != 0) {
    throw CheckpointError(path.string() + ": truncated tensor data");
  }
  const std::string_view blob(bytes.data() + pos, blob_len);
  pos += blob_len;
  const auto checksum = take<std::uint64_t>(bytes, pos, "checksum");
  if (pos != bytes.size()) throw CheckpointError(path.string() + ": trailing bytes after checksum");
  if (checksum != fnv1a_bytes(meta_text, blob)) throw CheckpointError(path.string() + ": checksum mismatch");

  LoadedCheckpoint out;
  try {
    out.metadata = json::parse(meta_text);
    apply_json(out.config, out.metadata.at("config"));
    validate(out.config);
    out.epochs_done = out.metadata.at("epochs_done").get<int>();
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": bad metadata: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": bad config echo: " + e.what());
  }
  if (out.metadata.value("model_hash", "") != model_hash(out.config)) {
    throw CheckpointError(path.string() + ": model hash does not match the config echo");
  }

  out.bundle = std::make_unique<ModelBundle>(model_config(out.config));
  if (out.metadata.at("schedule") != schedule_json(out.bundle->schedule)) {
    throw CheckpointError(path.string() + ": schedule constants differ from this build");
  }

  std::map<std::string, json> directory;
  for (const auto& entry : out.metadata.at("tensors")) directory[entry.at("name").get<std::string>()] = entry;

  auto read_into = [&](const std::string& name, Matrix& target) {
    const auto it = directory.find(name);
    if (it == directory.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
    const auto rows = it->second.at("rows").get<Eigen::Index>();
    const auto cols = it->second.at("cols").get<Eigen::Index>();
    const auto offset = it->second.at("offset").get<std::size_t>();
    if (rows != target.rows() || cols != target.cols()) {
      throw CheckpointError(path.string() + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " + std::to_string(target.rows()) + "x" +
                            std::to_string(target.cols()));
    }
    const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (offset > blob.size() || n > blob.size() - offset) {
      throw CheckpointError(path.string() + ": tensor " + name + " runs past the data blob");
    }
    std::memcpy(target.data(), blob.data() + offset, n);
    directory.erase(it);
  };

  for (Param* p : out.bundle->all_params()) {
    read_into(p->name, p->value);
    p->grad.setZero(p->value.rows(), p->value.cols());
  }
  out.adam.step = out.metadata.at("adam").at("step").get<long long>();
  if (out.adam.step > 0) {
    const ParamRefs trainable = out.bundle->trainable_params();
    out.adam.reset(trainable);
    out.adam.step = out.metadata.at("adam").at("step").get<long long>();
    for (std::size_t i = 0; i < trainable.size(); ++i) read_into("adam.m/" + trainable[i]->name, out.adam.m[i]);
    for (std::size_t i = 0; i < trainable.size(); ++i) read_into("adam.v/" + trainable[i]->name, out.adam.v[i]);
  }
  if (!directory.empty()) {
    throw CheckpointError(path.string() + ": unexpected tensor " + directory.begin()->first);
  }
  if (!all_finite(out.bundle->all_params())) throw CheckpointError(path.string() + ": non-finite parameter values");
  return out;
}

}  // namespace aord
