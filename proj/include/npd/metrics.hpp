#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace npd {

// One metrics.csv row. Phase rows (generate/score/filter/pack/annotate) carry
// wall_ms and leave the loss fields empty; train rows carry everything.
struct MetricsRow {
  uint64_t step = 0;
  uint32_t epoch = 0;
  std::string phase;
  std::optional<double> loss_total, loss_ce, loss_kd, lr, kl_lag;
  std::optional<double> zone_degenerate_frac, zone_proximal_frac,
      zone_disconnect_frac, zone_unconfirmed_frac;
  double wall_ms = 0.0;
};

class MetricsWriter {
public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void row(const MetricsRow& r);
  void flush();

private:
  std::ofstream out_;
};

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

inline const char* kMetricsHeader =
    "step,epoch,phase,loss_total,loss_ce,loss_kd,lr,kl_lag,"
    "zone_degenerate_frac,zone_proximal_frac,zone_disconnect_frac,"
    "zone_unconfirmed_frac,wall_ms";

}  // namespace npd
