#include "sgrad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sgrad/error.hpp"

namespace sgrad {
namespace {

constexpr char kMagic[4] = {'S', 'G', 'R', 'D'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) u64(e);
    u64(t.size());
    for (double v : t.data()) f64(v);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(buf_[off_++]);
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[off_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[off_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n, "string");
    std::string s(buf_.data() + off_, n);
    off_ += n;
    return s;
  }
  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank > 8) throw CheckpointError("checkpoint: implausible tensor rank at offset " +
                                        std::to_string(off_));
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(u64());
    const std::uint64_t count = u64();
    if (count != shape_product(shape)) {
      throw CheckpointError("checkpoint: tensor size/shape mismatch at offset " +
                            std::to_string(off_));
    }
    std::vector<double> vals(count);
    for (auto& v : vals) v = f64();
    return Tensor::from_data(std::move(shape), std::move(vals));
  }
  std::size_t offset() const { return off_; }
  bool exhausted() const { return off_ == buf_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (off_ + n > buf_.size()) {
      throw CheckpointError("checkpoint: truncated file, needed " + std::to_string(n) +
                            " bytes for " + what + " at offset " + std::to_string(off_) +
                            " of " + std::to_string(buf_.size()));
    }
  }

  std::vector<char> buf_;
  std::size_t off_ = 0;
};

void write_params(Writer& w, const ParamVector& p) {
  w.u32(static_cast<std::uint32_t>(p.segment_count()));
  for (const auto& s : p.segments()) {
    w.str(s.name);
    w.tensor(s.tensor);
  }
}

ParamVector read_params(Reader& r) {
  const std::uint32_t count = r.u32();
  ParamVector p;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    p.append(std::move(name), r.tensor());
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  Writer w;
  w.u32(Checkpoint::kVersion);
  w.str(cp.stage);

  const DenoiserSpec& spec = cp.model.spec();
  w.u64(spec.data_dim);
  w.u64(spec.hidden);
  w.u64(spec.time_dim);
  w.u64(spec.emb_dim);

  write_params(w, cp.model.base());

  w.u32(static_cast<std::uint32_t>(cp.model.adapters().size()));
  for (const auto& ad : cp.model.adapters()) {
    w.str(ad.layer);
    w.u64(ad.rank);
    w.tensor(ad.a);
    w.tensor(ad.b);
  }

  w.u32(static_cast<std::uint32_t>(cp.table.count()));
  for (const auto& id : cp.table.ids()) w.str(id);
  w.u64(cp.table.dim());
  w.u8(cp.table.trainable() ? 1 : 0);
  w.tensor(cp.table.matrix());

  w.u64(cp.schedule.T);
  for (double b : cp.schedule.beta) w.f64(b);

  for (std::uint64_t s : cp.rng_state) w.u64(s);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw CheckpointError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("checkpoint: bad magic in '" + path.string() + "'");
  }
  Reader r(std::vector<char>(bytes.begin() + sizeof(kMagic), bytes.end()));

  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint cp;
  cp.stage = r.str();

  DenoiserSpec spec;
  spec.data_dim = static_cast<std::size_t>(r.u64());
  spec.hidden = static_cast<std::size_t>(r.u64());
  spec.time_dim = static_cast<std::size_t>(r.u64());
  spec.emb_dim = static_cast<std::size_t>(r.u64());

  Rng scratch(0);
  cp.model = Denoiser::init(spec, scratch);
  cp.model.set_base(read_params(r));

  const std::uint32_t n_adapters = r.u32();
  std::vector<LowRankAdapter> adapters;
  for (std::uint32_t i = 0; i < n_adapters; ++i) {
    LowRankAdapter ad;
    ad.layer = r.str();
    ad.rank = static_cast<std::size_t>(r.u64());
    ad.a = r.tensor();
    ad.b = r.tensor();
    adapters.push_back(std::move(ad));
  }
  cp.model.set_adapters(std::move(adapters));

  const std::uint32_t n_concepts = r.u32();
  std::vector<std::string> ids;
  for (std::uint32_t i = 0; i < n_concepts; ++i) ids.push_back(r.str());
  const std::size_t emb_dim = static_cast<std::size_t>(r.u64());
  const bool trainable = r.u8() != 0;
  Rng scratch2(0);
  cp.table = EmbeddingTable::init(ids, emb_dim, scratch2);
  cp.table.set_matrix(r.tensor());
  cp.table.set_trainable(trainable);

  NoiseSchedule sched;
  sched.T = static_cast<std::size_t>(r.u64());
  sched.beta.resize(sched.T);
  sched.alpha.resize(sched.T);
  sched.alpha_bar.resize(sched.T);
  double prod = 1.0;
  for (std::size_t i = 0; i < sched.T; ++i) {
    sched.beta[i] = r.f64();
    sched.alpha[i] = 1.0 - sched.beta[i];
    prod *= sched.alpha[i];
    sched.alpha_bar[i] = prod;
  }
  cp.schedule = sched;

  for (auto& s : cp.rng_state) s = r.u64();

  if (!r.exhausted()) {
    throw CheckpointError("checkpoint: " + std::to_string(bytes.size() - 4 - r.offset()) +
                          " trailing bytes at offset " + std::to_string(r.offset()));
  }
  return cp;
}

}  // namespace sgrad
