#include "npd/annotate.hpp"

#include <algorithm>
#include <numeric>

#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/parallel.hpp"

namespace npd {

namespace {
constexpr char kSidecarMagic[9] = "NPDLOGK1";
}

size_t Sidecar::total_positions() const {
  size_t n = 0;
  for (const auto& v : per_pack) n += v.size();
  return n;
}

void top_k_of_row(std::span<const double> logits, uint32_t k,
                  std::vector<uint32_t>& ids, std::vector<float>& values) {
  uint32_t v = static_cast<uint32_t>(logits.size());
  std::vector<uint32_t> order(v);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](uint32_t a, uint32_t b) {
                      if (logits[a] != logits[b]) return logits[a] > logits[b];
                      return a < b;
                    });
  ids.assign(order.begin(), order.begin() + k);
  values.resize(k);
  for (uint32_t i = 0; i < k; ++i) values[i] = static_cast<float>(logits[ids[i]]);
}

Sidecar annotate(const TinyLm& teacher, const std::vector<Pack>& packs, uint32_t k,
                 uint32_t pack_crc) {
  const LmDims& d = teacher.dims();
  if (k == 0 || k > d.vocab)
    throw NpdError(ErrorKind::Config,
                   "annotate: k must be in [1, vocab]; got " + std::to_string(k));
  Sidecar sc;
  sc.k = k;
  sc.pack_crc = pack_crc;
  sc.per_pack.resize(packs.size());

  par::parallel_for(packs.size(), [&](size_t pi) {
    thread_local Workspace ws;
    ws.resize(d);
    const Pack& pack = packs[pi];
    validate_tokens(pack.tokens, d.vocab);
    auto& out = sc.per_pack[pi];
    for (size_t t = 0; t < pack.occupied; ++t) {
      if (!pack.loss_mask[t]) continue;
      forward_at(teacher, pack.tokens, pack.segment_ids, t, ws);
      TopKAnnotation ann;
      ann.pack_index = static_cast<uint32_t>(pi);
      ann.position = static_cast<uint32_t>(t);
      top_k_of_row(ws.logits, k, ann.indices, ann.logits);
      out.push_back(std::move(ann));
    }
  });
  return sc;
}

uint32_t write_sidecar(const Sidecar& sc, const std::filesystem::path& path) {
  io::BinaryWriter w;
  w.magic(kSidecarMagic);
  w.u32(sc.k);
  w.u32(static_cast<uint32_t>(sc.total_positions()));
  w.u32(sc.pack_crc);
  for (const auto& pack_anns : sc.per_pack) {
    for (const auto& ann : pack_anns) {
      w.u32(ann.pack_index);
      w.u32(ann.position);
      for (uint32_t i = 0; i < sc.k; ++i) {
        w.u32(ann.indices[i]);
        w.f32(ann.logits[i]);
      }
    }
  }
  return w.commit(path);
}

Sidecar read_sidecar(const std::filesystem::path& path, uint32_t expected_pack_crc) {
  io::BinaryReader r(path);
  r.expect_magic(kSidecarMagic);
  Sidecar sc;
  sc.k = r.u32();
  uint32_t count = r.u32();
  sc.pack_crc = r.u32();
  if (sc.pack_crc != expected_pack_crc)
    throw NpdError(ErrorKind::Staleness,
                   path.string() + ": sidecar was built for pack content " +
                       std::to_string(sc.pack_crc) + " but got " +
                       std::to_string(expected_pack_crc));
  for (uint32_t i = 0; i < count; ++i) {
    TopKAnnotation ann;
    ann.pack_index = r.u32();
    ann.position = r.u32();
    ann.indices.resize(sc.k);
    ann.logits.resize(sc.k);
    for (uint32_t j = 0; j < sc.k; ++j) {
      ann.indices[j] = r.u32();
      ann.logits[j] = r.f32();
    }
    if (ann.pack_index >= sc.per_pack.size()) sc.per_pack.resize(ann.pack_index + 1);
    sc.per_pack[ann.pack_index].push_back(std::move(ann));
  }
  r.verify_trailing_crc();
  return sc;
}

}  // namespace npd
