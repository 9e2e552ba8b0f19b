#include "pcsimp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "pcsimp/error.hpp"
#include "pcsimp/text.hpp"

namespace pcs {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'S', 'I', 'M', 'P', 'C', 'K'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0)
      throw Error(ErrorCode::IncompatibleCheckpoint, "bad magic, not a checkpoint file");
    pos_ += sizeof(kMagic);
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::IncompatibleCheckpoint, "checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::size_t>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(values[i]);
  }
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto v = parse_integer(item);
    if (!v || *v <= 0) throw Error(ErrorCode::IncompatibleCheckpoint, "bad layer width list '" + s + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

std::map<std::string, std::string> metadata(const NetworkParameters& p) {
  const ModelConfig& c = p.config;
  return {
      {"latent_dim", std::to_string(c.latent_dim)},
      {"graph_k", std::to_string(c.graph_k)},
      {"center_k", std::to_string(c.center_k)},
      {"d_attn", std::to_string(c.d_attn)},
      {"phi_hidden", join(c.phi_hidden)},
      {"gamma_hidden", join(c.gamma_hidden)},
      {"descriptor_k", std::to_string(c.descriptor_k)},
      {"h_policy", c.bandwidth.kind == BandwidthPolicy::Kind::Global ? "global" : "kth-neighbor"},
      {"h_global", format_double(c.bandwidth.global_h)},
      {"seed", std::to_string(c.seed)},
      {"generation", std::to_string(p.generation)},
  };
}

std::size_t meta_size(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw Error(ErrorCode::IncompatibleCheckpoint, "missing metadata '" + key + "'");
  const auto v = parse_integer(it->second);
  if (!v || *v < 0) throw Error(ErrorCode::IncompatibleCheckpoint, "bad metadata '" + key + "'");
  return static_cast<std::size_t>(*v);
}

}  // namespace

std::string serialize_checkpoint(const NetworkParameters& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, NetworkParameters::kFormatVersion);
  const auto meta = metadata(params);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_string(out, k);
    put_string(out, v);
  }
  const auto tensors = params.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_string(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
    for (double v : t.values) put<double>(out, v);
  }
  return out;
}

NetworkParameters deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  in.expect_magic();
  const auto version = in.get<std::uint32_t>();
  if (version != NetworkParameters::kFormatVersion)
    throw Error(ErrorCode::IncompatibleCheckpoint, "unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, std::string> meta;
  const auto n_meta = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = in.get_string();
    meta[key] = in.get_string();
  }

  ModelConfig config;
  config.latent_dim = meta_size(meta, "latent_dim");
  config.graph_k = meta_size(meta, "graph_k");
  config.center_k = meta_size(meta, "center_k");
  config.d_attn = meta_size(meta, "d_attn");
  config.descriptor_k = meta_size(meta, "descriptor_k");
  config.seed = meta_size(meta, "seed");
  config.phi_hidden = split_sizes(meta["phi_hidden"]);
  config.gamma_hidden = split_sizes(meta["gamma_hidden"]);
  config.bandwidth.kind =
      meta["h_policy"] == "global" ? BandwidthPolicy::Kind::Global : BandwidthPolicy::Kind::KthNeighbor;
  const auto h = parse_double(meta["h_global"]);
  if (!h) throw Error(ErrorCode::IncompatibleCheckpoint, "bad metadata 'h_global'");
  config.bandwidth.global_h = *h;

  NetworkParameters params;
  try {
    params = init_parameters(config, 0);
  } catch (const Error& e) {
    throw Error(ErrorCode::IncompatibleCheckpoint, e.what());
  }
  params.generation = meta_size(meta, "generation");

  auto tensors = params.tensors();
  const auto n_tensors = in.get<std::uint32_t>();
  if (n_tensors != tensors.size())
    throw Error(ErrorCode::IncompatibleCheckpoint, "expected " + std::to_string(tensors.size()) +
                                                       " tensors, found " + std::to_string(n_tensors));
  for (TensorRef& t : tensors) {
    const std::string name = in.get_string();
    if (name != t.name)
      throw Error(ErrorCode::IncompatibleCheckpoint, "expected tensor '" + t.name + "', found '" + name + "'");
    const auto rank = in.get<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.get<std::uint64_t>());
    if (shape != t.shape) throw Error(ErrorCode::IncompatibleCheckpoint, "tensor '" + name + "' has wrong shape");
    for (double& v : t.values) v = in.get<double>();
  }
  if (!in.at_end()) throw Error(ErrorCode::IncompatibleCheckpoint, "trailing bytes after last tensor");
  validate_parameters(params);
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParameters& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  const std::string bytes = serialize_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

NetworkParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace pcs
