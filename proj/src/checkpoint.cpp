#include "dnfer/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "dnfer/error.hpp"

namespace dnfer {

namespace {

constexpr char kMagic[8] = {'D', 'N', 'F', 'E', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagOptState = 1u;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64_span(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, const std::string& path)
      : data_(data), size_(size), path_(path) {}

  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data_ + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64_span(double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }
  std::size_t offset() const { return pos_; }
  bool exhausted() const { return pos_ == size_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > size_)
      throw ParseError(path_ + ": truncated checkpoint at byte offset " +
                       std::to_string(pos_));
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const MlpModel& model,
                     const AdamState* opt_state) {
  model.validate();
  std::vector<std::uint8_t> buf;
  Writer w(buf);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(opt_state != nullptr ? kFlagOptState : 0u);
  w.u32(static_cast<std::uint32_t>(model.layer_dims.size()));
  for (std::size_t d : model.layer_dims) w.u32(static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    w.f64_span(model.weights[l].data(), model.weights[l].size());
    w.f64_span(model.biases[l].data(), model.biases[l].size());
  }
  if (opt_state != nullptr) {
    w.u64(opt_state->step_count);
    w.f64(opt_state->beta1);
    w.f64(opt_state->beta2);
    w.f64(opt_state->epsilon);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      w.f64_span(opt_state->m_weights[l].data(), opt_state->m_weights[l].size());
      w.f64_span(opt_state->m_biases[l].data(), opt_state->m_biases[l].size());
      w.f64_span(opt_state->v_weights[l].data(), opt_state->v_weights[l].size());
      w.f64_span(opt_state->v_biases[l].data(), opt_state->v_biases[l].size());
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw InputError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  Reader r(buf.data(), buf.size(), path);

  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path + ": bad magic at byte offset 0, expected \"DNFERCKP\"");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t flags = r.u32();
  const std::uint32_t num_dims = r.u32();
  if (num_dims < 2)
    throw ParseError(path + ": checkpoint needs at least 2 layer dims, got " +
                     std::to_string(num_dims));

  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < num_dims; ++i)
    ckpt.model.layer_dims.push_back(r.u32());
  for (std::size_t l = 0; l + 1 < ckpt.model.layer_dims.size(); ++l) {
    const std::size_t out = ckpt.model.layer_dims[l + 1];
    const std::size_t in_dim = ckpt.model.layer_dims[l];
    Matrix w(out, in_dim);
    r.f64_span(w.data(), w.size());
    ckpt.model.weights.push_back(std::move(w));
    std::vector<double> b(out);
    r.f64_span(b.data(), b.size());
    ckpt.model.biases.push_back(std::move(b));
  }
  ckpt.model.validate();

  if ((flags & kFlagOptState) != 0) {
    AdamState state = make_adam_state(ckpt.model);
    state.step_count = r.u64();
    state.beta1 = r.f64();
    state.beta2 = r.f64();
    state.epsilon = r.f64();
    for (std::size_t l = 0; l < ckpt.model.num_layers(); ++l) {
      r.f64_span(state.m_weights[l].data(), state.m_weights[l].size());
      r.f64_span(state.m_biases[l].data(), state.m_biases[l].size());
      r.f64_span(state.v_weights[l].data(), state.v_weights[l].size());
      r.f64_span(state.v_biases[l].data(), state.v_biases[l].size());
    }
    ckpt.opt_state = std::move(state);
  }
  if (!r.exhausted())
    throw ParseError(path + ": trailing bytes at offset " + std::to_string(r.offset()));
  return ckpt;
}

}  // namespace dnfer
