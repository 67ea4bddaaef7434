#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "npd/annotate.hpp"
#include "npd/corpus.hpp"
#include "npd/ifd.hpp"
#include "npd/metrics.hpp"
#include "npd/model.hpp"
#include "npd/optim.hpp"
#include "npd/packing.hpp"
#include "npd/sampling.hpp"

namespace npd {

// How teacher/student probabilities are formed over the retained top-k set.
// Renormalized keeps KL >= 0 and matches the truncated sum exactly at k = V;
// Truncated evaluates the student at full support without renormalization.
enum class KdMode { Truncated, Renormalized };

struct KdScratch {
  std::vector<double> texp;
};

// KL over the stored top-k support for one position. student_exps/stats must
// come from softmax_stats over student_logits. If dlogits is non-null it must
// be zeroed; receives d(loss)/d(student_logits).
double kd_position(std::span<const double> student_logits,
                   std::span<const double> student_exps, const SoftmaxStats& stats,
                   const TopKAnnotation& ann, KdMode mode, KdScratch& scratch,
                   double* dlogits);

// Standalone form of the same quantity.
double kd_loss(std::span<const double> student_logits, const TopKAnnotation& ann,
               KdMode mode);

struct CompositeResult {
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_kd = 0.0;
  size_t positions = 0;
  LmTensors grad;
};

// Accumulates unscaled loss sums and gradient over one pack's masked
// positions. annotations == nullptr computes the pure-CE path. The
// annotations must cover exactly the pack's masked positions.
void accumulate_composite(const TinyLm& lm, const Pack& pack,
                          const std::vector<TopKAnnotation>* annotations,
                          double lambda, KdMode mode, Workspace& ws,
                          KdScratch& scratch, LmTensors& grad, double& ce_sum,
                          double& kd_sum, size_t& positions);

// L_total = (1 - lambda) * L_CE + lambda * L_KD over one pack, with gradient.
// At lambda = 0 this reproduces ce_loss_and_grad bit-for-bit.
CompositeResult composite_loss(const TinyLm& lm, const Pack& pack,
                               const std::vector<TopKAnnotation>& annotations,
                               double lambda, KdMode mode);

// {e in 1..E : (e-1) mod K == 0}
std::vector<uint32_t> refresh_schedule(uint32_t total_epochs, uint32_t refresh_interval);

struct ReplayBuffer {
  std::vector<Pack> packs;
  Sidecar sidecar;
  uint32_t generator_version = 0;
  uint32_t pack_crc = 0;
};

struct RunConfig {
  double lambda = 0.9;
  uint32_t top_k = 10;
  KdMode kd_normalization = KdMode::Renormalized;
  uint32_t total_epochs = 10;      // E
  uint32_t refresh_interval = 5;   // K
  uint32_t batch_packs = 4;
  OptConfig opt;                   // total_steps derived from the first buffer
  PackConfig pack_cfg;
  GenConfig gen_cfg;
  FilterConfig filter_cfg;
  uint64_t seed = 42;
  uint32_t probe_count = 64;
};

// Minibatch epochs over a fixed buffer; the shared inner loop of `run` and the
// stage-wise train command. epoch_start is the global epoch number of the
// first epoch here (shuffle streams and metrics are keyed by it).
void train_epochs(TinyLm& student, const ReplayBuffer& buffer, const RunConfig& cfg,
                  OptState& opt, uint32_t epoch_start, uint32_t epoch_count,
                  uint64_t& step_counter, const TinyLm* generator,
                  std::span<const Trajectory> probes, const ZoneStats* zones,
                  MetricsWriter* metrics);

uint32_t steps_per_epoch(size_t pack_count, uint32_t batch_packs);

// Full Algorithm-1 loop: at each refresh epoch snapshot the student, generate,
// score, filter, pack, annotate, and replace the buffer; train every epoch.
// Writes phase artifacts under out_dir when provided.
TinyLm run_npd(const RunConfig& cfg, const TinyLm& teacher, TinyLm student,
               std::span<const Example> pool, const std::filesystem::path& out_dir,
               MetricsWriter* metrics);

const char* kd_mode_name(KdMode mode);
KdMode kd_mode_from_name(const std::string& name);

}  // namespace npd
