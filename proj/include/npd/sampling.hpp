#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "npd/model.hpp"

namespace npd {

// One (prompt, response) pair sampled from a frozen policy snapshot.
struct Trajectory {
  uint64_t id = 0;
  std::vector<Token> prompt;
  std::vector<Token> response;  // includes the terminating EOS when emitted
  uint32_t policy_version = 0;
  uint32_t sample_index = 0;
  uint64_t seed = 0;  // derived stream key
};

enum class GenMode { Greedy, Sample };

struct GenConfig {
  double temperature = 1.0;
  uint32_t max_len = 16;
  uint32_t samples_per_prompt = 1;  // K paths; in Greedy mode path 0 is greedy
  GenMode mode = GenMode::Greedy;
};

struct PromptRef {
  uint64_t id = 0;
  std::span<const Token> tokens;
};

// Autoregressive sampling from softmax(logits / temperature), stopping at EOS
// or max_len. Each trajectory draws from its own counter stream keyed by
// (seed, prompt id, sample index), so output is identical for any worker
// count or execution order.
std::vector<Trajectory> generate(const TinyLm& snapshot, std::span<const PromptRef> prompts,
                                 const GenConfig& cfg, uint64_t seed);

void write_trajectories(const std::vector<Trajectory>& trajectories,
                        const std::filesystem::path& path);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

const char* gen_mode_name(GenMode mode);
GenMode gen_mode_from_name(const std::string& name);

}  // namespace npd
