#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "npd/model.hpp"

namespace npd {

// One sequence to place: prompt tokens are context-only, response tokens are
// supervised.
struct PackItem {
  uint64_t id = 0;
  std::span<const Token> prompt;
  std::span<const Token> response;
  size_t length() const { return prompt.size() + response.size(); }
};

struct Pack {
  std::vector<Token> tokens;        // length L, PAD-filled tail
  std::vector<uint16_t> segment_ids;  // non-decreasing, kPadSegment on the tail
  std::vector<uint8_t> loss_mask;   // true exactly on response positions
  std::vector<uint64_t> source_ids;  // placement order; not serialized
  size_t occupied = 0;
};

enum class PackStrategy { FirstFitDecreasing, Sequential };

struct PackConfig {
  uint32_t pack_len = 256;
  PackStrategy strategy = PackStrategy::FirstFitDecreasing;
};

// Places every item in exactly one pack. FirstFitDecreasing sorts by total
// length descending (id ascending tie-break) then first-fits; Sequential
// appends in input order, opening a new pack on overflow. Oversize items are
// an error, never truncated.
std::vector<Pack> pack(std::span<const PackItem> items, const PackConfig& cfg);

std::vector<PackItem> items_from_trajectories(std::span<const struct Trajectory> trajectories);
std::vector<PackItem> items_from_examples(std::span<const struct Example> examples);

// Checks every structural Pack invariant; returns human-readable violations.
std::vector<std::string> validate_pack(const Pack& pack, uint32_t pack_len,
                                       uint32_t vocab_size);

struct PackFile {
  uint32_t pack_len = 0;
  uint32_t vocab_size = 0;
  std::vector<Pack> packs;
  uint32_t payload_crc = 0;  // set by write/read; keys the annotation sidecar
};

uint32_t write_packs(const std::vector<Pack>& packs, uint32_t pack_len,
                     uint32_t vocab_size, const std::filesystem::path& path);
PackFile read_packs(const std::filesystem::path& path);

// CRC the pack file would carry, computed without touching the filesystem.
uint32_t packs_content_crc(const std::vector<Pack>& packs, uint32_t pack_len,
                           uint32_t vocab_size);

const char* pack_strategy_name(PackStrategy s);
PackStrategy pack_strategy_from_name(const std::string& name);

}  // namespace npd
