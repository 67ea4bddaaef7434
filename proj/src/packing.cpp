#include "npd/packing.hpp"

#include <algorithm>
#include <numeric>

#include "npd/corpus.hpp"
#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/sampling.hpp"

namespace npd {

namespace {

constexpr char kPackMagic[9] = "NPDPACK1";

Pack make_empty_pack(uint32_t pack_len) {
  Pack p;
  p.tokens.assign(pack_len, Vocab::kPad);
  p.segment_ids.assign(pack_len, kPadSegment);
  p.loss_mask.assign(pack_len, 0);
  return p;
}

void place(Pack& pack, const PackItem& item) {
  size_t at = pack.occupied;
  uint16_t seg = pack.source_ids.empty()
                     ? 0
                     : static_cast<uint16_t>(pack.segment_ids[at - 1] + 1);
  for (Token t : item.prompt) {
    pack.tokens[at] = t;
    pack.segment_ids[at] = seg;
    pack.loss_mask[at] = 0;
    ++at;
  }
  for (Token t : item.response) {
    pack.tokens[at] = t;
    pack.segment_ids[at] = seg;
    pack.loss_mask[at] = 1;
    ++at;
  }
  pack.occupied = at;
  pack.source_ids.push_back(item.id);
}

}  // namespace

std::vector<Pack> pack(std::span<const PackItem> items, const PackConfig& cfg) {
  for (const auto& item : items)
    if (item.length() > cfg.pack_len)
      throw NpdError(ErrorKind::Validation,
                     "oversize sequence: trajectory " + std::to_string(item.id) +
                         " has length " + std::to_string(item.length()) +
                         " > pack_len " + std::to_string(cfg.pack_len));

  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), size_t(0));
  if (cfg.strategy == PackStrategy::FirstFitDecreasing) {
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (items[a].length() != items[b].length())
        return items[a].length() > items[b].length();
      return items[a].id < items[b].id;
    });
  }

  std::vector<Pack> packs;
  for (size_t idx : order) {
    const PackItem& item = items[idx];
    size_t target = packs.size();
    if (cfg.strategy == PackStrategy::FirstFitDecreasing) {
      for (size_t b = 0; b < packs.size(); ++b) {
        if (packs[b].occupied + item.length() <= cfg.pack_len) {
          target = b;
          break;
        }
      }
    } else if (!packs.empty() &&
               packs.back().occupied + item.length() <= cfg.pack_len) {
      target = packs.size() - 1;
    }
    if (target == packs.size()) packs.push_back(make_empty_pack(cfg.pack_len));
    place(packs[target], item);
  }
  return packs;
}

std::vector<PackItem> items_from_trajectories(std::span<const Trajectory> trajectories) {
  std::vector<PackItem> items(trajectories.size());
  for (size_t i = 0; i < trajectories.size(); ++i) {
    items[i].id = trajectories[i].id;
    items[i].prompt = trajectories[i].prompt;
    items[i].response = trajectories[i].response;
  }
  return items;
}

std::vector<PackItem> items_from_examples(std::span<const Example> examples) {
  std::vector<PackItem> items(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    items[i].id = examples[i].id;
    items[i].prompt = examples[i].prompt;
    items[i].response = examples[i].target;
  }
  return items;
}

std::vector<std::string> validate_pack(const Pack& pack, uint32_t pack_len,
                                       uint32_t vocab_size) {
  std::vector<std::string> v;
  if (pack.tokens.size() != pack_len || pack.segment_ids.size() != pack_len ||
      pack.loss_mask.size() != pack_len) {
    v.push_back("row lengths differ from pack_len");
    return v;
  }
  if (pack.occupied > pack_len) v.push_back("occupied exceeds pack_len");

  for (size_t i = 0; i < pack_len; ++i) {
    bool in_tail = i >= pack.occupied;
    if (in_tail) {
      if (pack.segment_ids[i] != kPadSegment)
        v.push_back("position " + std::to_string(i) + ": PAD region segment id not 0xFFFF");
      if (pack.tokens[i] != Vocab::kPad)
        v.push_back("position " + std::to_string(i) + ": PAD region token not PAD");
      if (pack.loss_mask[i])
        v.push_back("position " + std::to_string(i) + ": loss_mask true on PAD");
      continue;
    }
    if (pack.tokens[i] >= vocab_size)
      v.push_back("position " + std::to_string(i) + ": token out of vocab");
    if (pack.segment_ids[i] == kPadSegment)
      v.push_back("position " + std::to_string(i) + ": PAD segment id before tail");
    if (i > 0 && i < pack.occupied && pack.segment_ids[i] < pack.segment_ids[i - 1])
      v.push_back("position " + std::to_string(i) + ": segment id decreases");
    if (i > 0 && i < pack.occupied &&
        pack.segment_ids[i] > pack.segment_ids[i - 1] + 1)
      v.push_back("position " + std::to_string(i) + ": segment id skips");
  }
  if (pack.occupied > 0 && pack.segment_ids[0] != 0)
    v.push_back("first segment id is not 0");

  // per segment: mask false at start, and once true it stays true to the end
  for (size_t i = 0; i < pack.occupied; ++i) {
    bool seg_start = i == 0 || pack.segment_ids[i] != pack.segment_ids[i - 1];
    if (seg_start && pack.loss_mask[i])
      v.push_back("position " + std::to_string(i) + ": loss_mask true at segment start");
    if (!seg_start && i > 0 && pack.loss_mask[i - 1] && !pack.loss_mask[i] &&
        pack.segment_ids[i] == pack.segment_ids[i - 1])
      v.push_back("position " + std::to_string(i) + ": supervised region not contiguous");
  }
  return v;
}

uint32_t write_packs(const std::vector<Pack>& packs, uint32_t pack_len,
                     uint32_t vocab_size, const std::filesystem::path& path) {
  io::BinaryWriter w;
  w.magic(kPackMagic);
  w.u32(pack_len);
  w.u32(static_cast<uint32_t>(packs.size()));
  w.u32(vocab_size);
  for (const auto& p : packs) {
    w.u32_array(p.tokens.data(), p.tokens.size());
    w.u16_array(p.segment_ids.data(), p.segment_ids.size());
    w.bytes(p.loss_mask.data(), p.loss_mask.size());
  }
  return w.commit(path);
}

uint32_t packs_content_crc(const std::vector<Pack>& packs, uint32_t pack_len,
                           uint32_t vocab_size) {
  uint32_t crc = 0;
  auto add = [&](const void* data, size_t n) { crc = io::crc32_bytes(data, n, crc); };
  uint32_t header[3] = {pack_len, static_cast<uint32_t>(packs.size()), vocab_size};
  add(header, sizeof(header));
  for (const auto& p : packs) {
    add(p.tokens.data(), p.tokens.size() * 4);
    add(p.segment_ids.data(), p.segment_ids.size() * 2);
    add(p.loss_mask.data(), p.loss_mask.size());
  }
  return crc;
}

PackFile read_packs(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic(kPackMagic);
  PackFile f;
  f.pack_len = r.u32();
  uint32_t count = r.u32();
  f.vocab_size = r.u32();
  f.packs.resize(count);
  for (auto& p : f.packs) {
    p.tokens.resize(f.pack_len);
    p.segment_ids.resize(f.pack_len);
    p.loss_mask.resize(f.pack_len);
    r.u32_array(p.tokens.data(), f.pack_len);
    r.u16_array(p.segment_ids.data(), f.pack_len);
    r.bytes(p.loss_mask.data(), f.pack_len);
    p.occupied = f.pack_len;
    while (p.occupied > 0 && p.segment_ids[p.occupied - 1] == kPadSegment) --p.occupied;
  }
  f.payload_crc = r.verify_trailing_crc();
  return f;
}

const char* pack_strategy_name(PackStrategy s) {
  return s == PackStrategy::FirstFitDecreasing ? "ffd" : "sequential";
}

PackStrategy pack_strategy_from_name(const std::string& name) {
  if (name == "ffd") return PackStrategy::FirstFitDecreasing;
  if (name == "sequential") return PackStrategy::Sequential;
  throw NpdError(ErrorKind::Config, "unknown pack strategy: " + name);
}

}  // namespace npd
