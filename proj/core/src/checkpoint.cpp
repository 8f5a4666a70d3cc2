#include "ctflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ctflow {

ModelBundle ModelBundle::initialized(Scheme scheme, const FieldModelConfig& cfg, std::uint64_t seed) {
  ModelBundle b;
  b.scheme = scheme;
  b.field = VectorFieldModel::initialized(cfg, seed);
  if (scheme == Scheme::PredictiveCascade) {
    b.predictor = PredictiveModel::initialized(cfg.state_dim, cfg.width, cfg.depth, seed + 1);
  }
  return b;
}

ModelBundle ModelBundle::zeros(Scheme scheme, const FieldModelConfig& cfg) {
  ModelBundle b;
  b.scheme = scheme;
  b.field = VectorFieldModel(cfg);
  if (scheme == Scheme::PredictiveCascade) b.predictor = PredictiveModel(cfg.state_dim, cfg.width, cfg.depth);
  return b;
}

Eigen::Index ModelBundle::parameter_count() const {
  return field.parameter_count() + (predictor ? predictor->parameter_count() : 0);
}

Eigen::VectorXd ModelBundle::flat_parameters() const {
  Eigen::VectorXd p(parameter_count());
  p.head(field.parameter_count()) = field.parameters();
  if (predictor) p.tail(predictor->parameter_count()) = predictor->parameters();
  return p;
}

void ModelBundle::set_flat_parameters(const Eigen::VectorXd& p) {
  if (p.size() != parameter_count()) throw DimensionError("model bundle: parameter count mismatch");
  field.set_parameters(p.head(field.parameter_count()));
  if (predictor) predictor->set_parameters(p.tail(predictor->parameter_count()));
}

ModelBundle Checkpoint::bundle(bool use_ema) const {
  ModelBundle b = ModelBundle::zeros(scheme, model);
  if (b.predictor.has_value() != has_predictor) throw DataError("checkpoint: predictor flag inconsistent with scheme");
  b.set_flat_parameters(use_ema && ema.size() > 0 ? ema : params);
  return b;
}

namespace {

constexpr char kMagic[8] = {'C', 'T', 'F', 'L', 'O', 'W', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagEma = 1u << 0;
constexpr std::uint32_t kFlagPredictor = 1u << 1;
constexpr std::uint32_t kFlagOptimizer = 1u << 2;

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
  std::vector<std::uint8_t> bytes;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::VectorXd vec(std::uint64_t n) {
    if (n > (bytes_.size() - pos_) / 8) throw DataError("checkpoint: truncated parameter block");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t scheme_code(Scheme s) { return static_cast<std::uint32_t>(s); }

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  const Eigen::Index p = ck.params.size();
  const bool has_ema = ck.ema.size() > 0;
  const bool has_opt = ck.adam.m.size() > 0;
  if ((has_ema && ck.ema.size() != p) || (has_opt && (ck.adam.m.size() != p || ck.adam.v.size() != p))) {
    throw DimensionError("checkpoint: parameter blocks have different lengths");
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(scheme_code(ck.scheme));
  w.u64(static_cast<std::uint64_t>(ck.model.state_dim));
  w.u32(static_cast<std::uint32_t>(ck.model.depth));
  w.u32(static_cast<std::uint32_t>(ck.model.width));
  w.u32(static_cast<std::uint32_t>(ck.model.embed_dim));
  w.u32((has_ema ? kFlagEma : 0) | (ck.has_predictor ? kFlagPredictor : 0) | (has_opt ? kFlagOptimizer : 0));
  w.u64(ck.adam.step);
  w.u64(ck.epoch);
  w.f64(ck.best_valid);
  w.u64(ck.epochs_since_improvement);
  w.u64(static_cast<std::uint64_t>(p));
  w.vec(ck.params);
  if (has_ema) w.vec(ck.ema);
  if (has_opt) {
    w.vec(ck.adam.m);
    w.vec(ck.adam.v);
  }
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError("checkpoint: bad magic");
  if (r.u32() != kVersion) throw DataError("checkpoint: unsupported format version");
  Checkpoint ck;
  const std::uint32_t scheme = r.u32();
  if (scheme > 2) throw DataError("checkpoint: unknown scheme code " + std::to_string(scheme));
  ck.scheme = static_cast<Scheme>(scheme);
  ck.model.state_dim = static_cast<Eigen::Index>(r.u64());
  ck.model.depth = r.u32();
  ck.model.width = r.u32();
  ck.model.embed_dim = r.u32();
  const std::uint32_t flags = r.u32();
  ck.has_predictor = (flags & kFlagPredictor) != 0;
  ck.adam.step = r.u64();
  ck.epoch = r.u64();
  ck.best_valid = r.f64();
  ck.epochs_since_improvement = r.u64();
  const std::uint64_t p = r.u64();

  const ModelBundle shape = ModelBundle::zeros(ck.scheme, ck.model);
  if (static_cast<std::uint64_t>(shape.parameter_count()) != p || shape.predictor.has_value() != ck.has_predictor) {
    throw DataError("checkpoint: parameter count does not match the recorded architecture");
  }
  ck.params = r.vec(p);
  if (flags & kFlagEma) ck.ema = r.vec(p);
  if (flags & kFlagOptimizer) {
    ck.adam.m = r.vec(p);
    ck.adam.v = r.vec(p);
  }
  if (!r.at_end()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace ctflow
