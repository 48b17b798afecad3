#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mapfw/error.hpp"
#include "model_internal.hpp"

namespace mapfw {

namespace {

constexpr char kMagic[4] = {'M', 'W', 'L', 'D'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>) {
      bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
    } else {
      bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  std::string out;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    if (at_ + sizeof(T) > bytes_.size()) throw Error(ErrorCode::BadMagic, "params file is truncated");
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[at_ + b])) << (8 * b);
    }
    at_ += sizeof(T);
    if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(std::bit_cast<double>(bits));
    } else {
      return static_cast<T>(bits);
    }
  }
  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  std::string_view bytes_;
  std::size_t at_ = 0;
};

}  // namespace

std::string encode_params(const ModelParams& params) {
  Writer w;
  w.out.assign(kMagic, 4);
  w.put<std::uint32_t>(kParamsVersion);
  const ModelConfig& c = params.config;
  w.put<std::int32_t>(c.d_model);
  w.put<std::int32_t>(c.n_layers);
  w.put<std::int32_t>(c.n_heads);
  w.put<std::int32_t>(c.ffn_mult);
  w.put<std::int32_t>(c.vocab_size);
  w.put<std::int32_t>(c.seq_len);
  w.put<std::uint8_t>(c.sre_enabled ? 1 : 0);
  w.put<double>(c.learning_rate);
  w.put<std::int32_t>(c.batch_size);
  w.put<std::int32_t>(c.warmup_steps);
  w.put<std::uint64_t>(c.seed);
  w.put<std::int64_t>(params.trained_steps);
  w.put<std::uint64_t>(params.values.size());
  for (double v : params.values) w.put<double>(v);
  return std::move(w.out);
}

ModelParams decode_params(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::BadMagic, "not an MWLD params file");
  }
  Reader r(bytes.substr(4));
  if (r.get<std::uint32_t>() != kParamsVersion) throw Error(ErrorCode::VersionMismatch, "unsupported params version");
  ModelParams p;
  ModelConfig& c = p.config;
  c.d_model = r.get<std::int32_t>();
  c.n_layers = r.get<std::int32_t>();
  c.n_heads = r.get<std::int32_t>();
  c.ffn_mult = r.get<std::int32_t>();
  c.vocab_size = r.get<std::int32_t>();
  c.seq_len = r.get<std::int32_t>();
  c.sre_enabled = r.get<std::uint8_t>() != 0;
  c.learning_rate = r.get<double>();
  c.batch_size = r.get<std::int32_t>();
  c.warmup_steps = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  p.trained_steps = r.get<std::int64_t>();
  const auto count = r.get<std::uint64_t>();
  c.validate();
  if (count != param_count(c)) throw Error(ErrorCode::ShapeMismatch, "parameter count does not match config");
  if (r.remaining() != count * sizeof(double)) throw Error(ErrorCode::BadMagic, "params file is truncated");
  p.values.resize(count);
  for (double& v : p.values) v = r.get<double>();
  return p;
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  const std::string bytes = encode_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_params(ss.str());
}

ModelParams load_params(const std::string& path, const ModelConfig& expected) {
  ModelParams p = load_params(path);
  if (!p.config.same_architecture(expected)) {
    throw Error(ErrorCode::ShapeMismatch, "stored model architecture differs from the expected config");
  }
  return p;
}

}  // namespace mapfw
