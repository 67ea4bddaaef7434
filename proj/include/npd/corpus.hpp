#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "npd/vocab.hpp"

namespace npd {

enum class TaskKind { Reverse, ModAdd };

struct TaskSpec {
  TaskKind kind = TaskKind::Reverse;
  uint32_t prompt_len_min = 1;
  uint32_t prompt_len_max = 3;
  uint32_t alphabet_size = 12;
  uint64_t seed = 1;
};

// prompt = BOS payload... SEP, target = f(payload)... EOS
struct Example {
  uint64_t id = 0;
  std::vector<Token> prompt;
  std::vector<Token> target;
};

// Deterministic function of (vocab, spec, n): example i is generated from its
// own counter stream, so the corpus is stable under any evaluation order.
std::vector<Example> gen_corpus(const Vocab& vocab, const TaskSpec& spec, size_t n);

// The task function itself, exposed for oracle-style re-checks.
std::vector<Token> task_target(const Vocab& vocab, const TaskSpec& spec,
                               std::span<const Token> payload);

std::pair<std::vector<Example>, std::vector<Example>> split_corpus(
    const std::vector<Example>& examples, double train_fraction, double eval_fraction);

void write_corpus(const std::vector<Example>& examples, const std::filesystem::path& path);
std::vector<Example> read_corpus(const std::filesystem::path& path);

const char* task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

}  // namespace npd
