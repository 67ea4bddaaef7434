#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "npd/corpus.hpp"
#include "npd/pretrain.hpp"
#include "npd/trainer.hpp"

namespace npd {

// Flat key=value config with [section] headers, '#' comments, strict parsing:
// an unknown section or key is an error so ablation configs stay auditable.
struct CliConfig {
  uint64_t seed = 42;

  // [corpus]
  TaskSpec task{};
  uint32_t vocab_size = 16;
  uint64_t corpus_count = 20000;
  double train_fraction = 0.9;
  double eval_fraction = 0.1;

  // [teacher], [student] (vocab comes from vocab_size)
  LmDims teacher_dims{16, 6, 32, 128};
  LmDims student_dims{16, 6, 32, 16};

  // [pretrain]
  uint32_t teacher_epochs = 30;
  uint32_t student_epochs = 4;
  uint32_t pretrain_batch_packs = 4;
  uint32_t pretrain_pack_len = 256;
  OptConfig pretrain_opt{3e-3, 3e-4, 0.9, 0.999, 1e-8, 0.1, 1.0, 1};

  // [gen]
  GenConfig gen{};
  uint64_t pool_size = 2048;

  // [filter]
  FilterConfig filter{};

  // [pack]
  PackConfig pack_cfg{};

  // [annotate]
  uint32_t top_k = 10;

  // [train]
  double lambda = 0.9;
  KdMode kd_normalization = KdMode::Renormalized;
  uint32_t train_epochs = 10;
  uint32_t refresh_interval = 5;
  uint32_t train_batch_packs = 4;
  OptConfig train_opt{3e-3, 3e-4, 0.9, 0.999, 1e-8, 0.1, 1.0, 1};

  // [monitor]
  uint32_t probe_count = 64;
  uint32_t spike_window = 16;
  double spike_z = 6.0;
  double kl_epsilon = 0.10;

  // [paths]
  std::string corpus_path;
  std::string teacher_ckpt;
  std::string student_ckpt;
  std::string out_dir;

  RunConfig to_run_config() const;
  Vocab vocab() const { return Vocab(vocab_size); }

  // canonical dump; its CRC32 is the config hash recorded in artifact metas
  std::string dump() const;
  uint32_t hash() const;
};

CliConfig parse_config(const std::string& text, const std::string& origin = "<config>");
CliConfig load_config(const std::filesystem::path& path);

}  // namespace npd
