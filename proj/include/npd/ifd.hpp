#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "npd/model.hpp"
#include "npd/sampling.hpp"

namespace npd {

enum class Zone : uint8_t {
  Degenerate = 0,
  Proximal = 1,
  CognitiveDisconnect = 2,
  TeacherUnconfirmed = 3,
  DegenerateLength = 4,
};
inline constexpr size_t kZoneCount = 5;

struct IfdRecord {
  uint64_t id = 0;
  double loss_cond_student = 0.0, loss_uncond_student = 0.0;
  double loss_cond_teacher = 0.0, loss_uncond_teacher = 0.0;
  double ifd_student = 0.0, ifd_teacher = 0.0;
  double delta_ifd = 0.0;
  Zone zone = Zone::DegenerateLength;
  bool flagged = false;  // empty response or division guard tripped
};

struct FilterConfig {
  double tau = 0.8;
  bool require_teacher_quality = true;  // Proximal additionally needs IFD_teacher <= 1
  double epsilon_div = 1e-8;
  uint32_t min_response_len = 1;
  bool enabled = true;  // disabled keeps every scoreable (non-flagged) record
};

struct IfdScore {
  double loss_cond = 0.0;
  double loss_uncond = 0.0;
  double ifd = 0.0;
};

// IFD of a response under one model: conditioned CE over the response given
// the prompt, unconditioned CE with the response presented alone after the
// virtual BOS window, and their ratio. Throws on an empty response or when
// the unconditioned loss falls under epsilon_div.
IfdScore ifd(const TinyLm& lm, std::span<const Token> prompt,
             std::span<const Token> response, double epsilon_div = 1e-8);

double delta_ifd(double ifd_teacher, double ifd_student);

Zone classify_zone(const IfdRecord& rec, const FilterConfig& cfg);

// Scores one trajectory under both models and classifies it.
IfdRecord score_trajectory(const TinyLm& teacher, const TinyLm& student,
                           const Trajectory& trajectory, const FilterConfig& cfg);

std::vector<IfdRecord> score_trajectories(const TinyLm& teacher, const TinyLm& student,
                                          std::span<const Trajectory> trajectories,
                                          const FilterConfig& cfg);

struct ZoneStats {
  std::array<uint64_t, kZoneCount> counts{};
  std::array<double, kZoneCount> fractions{};
  uint64_t total = 0;
};

ZoneStats zone_stats(std::span<const IfdRecord> records);

struct FilterResult {
  std::vector<uint64_t> kept_ids;
  ZoneStats stats;
};

// Keeps exactly the Proximal records (or all non-flagged ones when the filter
// is disabled).
FilterResult filter_records(std::span<const IfdRecord> records, const FilterConfig& cfg);

void write_scores(const std::vector<IfdRecord>& records, const std::filesystem::path& path);
std::vector<IfdRecord> read_scores(const std::filesystem::path& path);

void write_zone_stats(const ZoneStats& stats, const std::filesystem::path& path);
void write_kept_ids(const std::vector<uint64_t>& ids, const std::filesystem::path& path);
std::vector<uint64_t> read_kept_ids(const std::filesystem::path& path);

const char* zone_name(Zone z);
Zone zone_from_name(const std::string& name);

}  // namespace npd
