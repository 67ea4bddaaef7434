#include "npd/checkpoint.hpp"

#include "npd/io.hpp"

namespace npd {

namespace {
constexpr char kCkptMagic[9] = "NPDCKPT1";
}

uint32_t write_checkpoint(const TinyLm& lm, const std::filesystem::path& path) {
  io::BinaryWriter w;
  w.magic(kCkptMagic);
  const LmDims& d = lm.dims();
  w.u32(d.vocab);
  w.u32(d.window);
  w.u32(d.embed_dim);
  w.u32(d.hidden_dim);
  w.u32(lm.version);
  lm.p.for_each([&](const char*, const std::vector<double>& t) {
    w.f64_array(t.data(), t.size());
  });
  return w.commit(path);
}

TinyLm read_checkpoint(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic(kCkptMagic);
  LmDims d;
  d.vocab = r.u32();
  d.window = r.u32();
  d.embed_dim = r.u32();
  d.hidden_dim = r.u32();
  uint32_t version = r.u32();
  TinyLm lm = TinyLm::zeros(d);
  lm.version = version;
  lm.p.for_each([&](const char*, std::vector<double>& t) {
    r.f64_array(t.data(), t.size());
  });
  r.verify_trailing_crc();
  return lm;
}

}  // namespace npd
