#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "npd/model.hpp"
#include "npd/packing.hpp"

namespace npd {

// Teacher top-k logits at one supervised position: ids in descending logit
// order (ascending token id on ties), raw pre-softmax values in f32.
struct TopKAnnotation {
  uint32_t pack_index = 0;
  uint32_t position = 0;
  std::vector<uint32_t> indices;
  std::vector<float> logits;
};

struct Sidecar {
  uint32_t k = 0;
  uint32_t pack_crc = 0;  // payload CRC of the pack file this annotates
  // grouped per pack, positions ascending
  std::vector<std::vector<TopKAnnotation>> per_pack;
  size_t total_positions() const;
};

// One prefill pass per pack; emits annotations at exactly the loss-masked
// positions. pack_crc ties the result to the pack content.
Sidecar annotate(const TinyLm& teacher, const std::vector<Pack>& packs, uint32_t k,
                 uint32_t pack_crc);

// Selects the k largest entries of a logit row (ties by ascending id).
void top_k_of_row(std::span<const double> logits, uint32_t k,
                  std::vector<uint32_t>& ids, std::vector<float>& values);

uint32_t write_sidecar(const Sidecar& sc, const std::filesystem::path& path);

// expected_pack_crc: payload CRC of the pack file the caller is about to
// train on; mismatch is a staleness error.
Sidecar read_sidecar(const std::filesystem::path& path, uint32_t expected_pack_crc);

}  // namespace npd
