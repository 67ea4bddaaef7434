#include "npd/ifd.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/parallel.hpp"

namespace npd {

using nlohmann::json;

IfdScore ifd(const TinyLm& lm, std::span<const Token> prompt,
             std::span<const Token> response, double epsilon_div) {
  if (response.empty())
    throw NpdError(ErrorKind::Input, "ifd: empty response (degenerate length)");
  IfdScore s;
  s.loss_cond = mean_sequence_ce(lm, prompt, response);
  s.loss_uncond = mean_sequence_ce(lm, {}, response);
  if (s.loss_uncond < epsilon_div)
    throw NpdError(ErrorKind::Numerical,
                   "ifd: unconditioned loss under division guard (" +
                       std::to_string(s.loss_uncond) + ")");
  s.ifd = s.loss_cond / s.loss_uncond;
  return s;
}

double delta_ifd(double ifd_teacher, double ifd_student) {
  return ifd_teacher - ifd_student;
}

Zone classify_zone(const IfdRecord& rec, const FilterConfig& cfg) {
  if (rec.flagged) return Zone::DegenerateLength;
  if (rec.delta_ifd < 0.0) return Zone::Degenerate;
  if (rec.delta_ifd > cfg.tau) return Zone::CognitiveDisconnect;
  // 0 <= delta <= tau, boundaries inclusive
  if (cfg.require_teacher_quality && rec.ifd_teacher > 1.0)
    return Zone::TeacherUnconfirmed;
  return Zone::Proximal;
}

IfdRecord score_trajectory(const TinyLm& teacher, const TinyLm& student,
                           const Trajectory& trajectory, const FilterConfig& cfg) {
  IfdRecord rec;
  rec.id = trajectory.id;
  if (trajectory.response.size() < cfg.min_response_len || trajectory.response.empty()) {
    rec.flagged = true;
    double nan = std::numeric_limits<double>::quiet_NaN();
    rec.loss_cond_student = rec.loss_uncond_student = nan;
    rec.loss_cond_teacher = rec.loss_uncond_teacher = nan;
    rec.ifd_student = rec.ifd_teacher = rec.delta_ifd = nan;
    rec.zone = Zone::DegenerateLength;
    return rec;
  }
  try {
    IfdScore st = ifd(student, trajectory.prompt, trajectory.response, cfg.epsilon_div);
    IfdScore te = ifd(teacher, trajectory.prompt, trajectory.response, cfg.epsilon_div);
    rec.loss_cond_student = st.loss_cond;
    rec.loss_uncond_student = st.loss_uncond;
    rec.loss_cond_teacher = te.loss_cond;
    rec.loss_uncond_teacher = te.loss_uncond;
    rec.ifd_student = st.ifd;
    rec.ifd_teacher = te.ifd;
    rec.delta_ifd = delta_ifd(te.ifd, st.ifd);
  } catch (const NpdError&) {
    // division guard: memorized/trivial string, rejected as degenerate length
    rec.flagged = true;
    rec.zone = Zone::DegenerateLength;
    return rec;
  }
  rec.zone = classify_zone(rec, cfg);
  return rec;
}

std::vector<IfdRecord> score_trajectories(const TinyLm& teacher, const TinyLm& student,
                                          std::span<const Trajectory> trajectories,
                                          const FilterConfig& cfg) {
  std::vector<IfdRecord> out(trajectories.size());
  par::parallel_for(trajectories.size(), [&](size_t i) {
    out[i] = score_trajectory(teacher, student, trajectories[i], cfg);
  });
  return out;
}

ZoneStats zone_stats(std::span<const IfdRecord> records) {
  ZoneStats s;
  for (const auto& rec : records) s.counts[static_cast<size_t>(rec.zone)] += 1;
  s.total = records.size();
  if (s.total > 0)
    for (size_t z = 0; z < kZoneCount; ++z)
      s.fractions[z] = static_cast<double>(s.counts[z]) / static_cast<double>(s.total);
  return s;
}

FilterResult filter_records(std::span<const IfdRecord> records, const FilterConfig& cfg) {
  FilterResult res;
  res.stats = zone_stats(records);
  for (const auto& rec : records) {
    bool keep = cfg.enabled ? rec.zone == Zone::Proximal : !rec.flagged;
    if (keep) res.kept_ids.push_back(rec.id);
  }
  return res;
}

namespace {

json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double null_to_nan(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace

void write_scores(const std::vector<IfdRecord>& records, const std::filesystem::path& path) {
  std::string buf;
  for (const auto& rec : records) {
    json j;
    j["id"] = rec.id;
    j["ifd_student"] = number_or_null(rec.ifd_student);
    j["ifd_teacher"] = number_or_null(rec.ifd_teacher);
    j["delta_ifd"] = number_or_null(rec.delta_ifd);
    j["zone"] = zone_name(rec.zone);
    buf += j.dump();
    buf += '\n';
  }
  io::write_text_atomic(path, buf);
}

std::vector<IfdRecord> read_scores(const std::filesystem::path& path) {
  std::vector<IfdRecord> out;
  auto lines = io::read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      json j = json::parse(lines[i]);
      IfdRecord rec;
      rec.id = j.at("id").get<uint64_t>();
      rec.ifd_student = null_to_nan(j.at("ifd_student"));
      rec.ifd_teacher = null_to_nan(j.at("ifd_teacher"));
      rec.delta_ifd = null_to_nan(j.at("delta_ifd"));
      rec.zone = zone_from_name(j.at("zone").get<std::string>());
      rec.flagged = rec.zone == Zone::DegenerateLength;
      out.push_back(rec);
    } catch (const json::exception& e) {
      throw NpdError(ErrorKind::Parse, path.string() + ": line " +
                                           std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void write_zone_stats(const ZoneStats& stats, const std::filesystem::path& path) {
  json counts = json::object();
  json fractions = json::object();
  for (size_t z = 0; z < kZoneCount; ++z) {
    const char* name = zone_name(static_cast<Zone>(z));
    counts[name] = stats.counts[z];
    fractions[name] = stats.fractions[z];
  }
  json j;
  j["total"] = stats.total;
  j["counts"] = counts;
  j["fractions"] = fractions;
  // large-scale early-stage percentages, included for side-by-side reading
  j["reference_large_scale_early_pct"] = {
      {"degenerate", 2.60}, {"proximal", 96.20}, {"cognitive_disconnect", 1.20}};
  io::write_text_atomic(path, j.dump(2) + "\n");
}

void write_kept_ids(const std::vector<uint64_t>& ids, const std::filesystem::path& path) {
  json j;
  j["kept_ids"] = ids;
  io::write_text_atomic(path, j.dump() + "\n");
}

std::vector<uint64_t> read_kept_ids(const std::filesystem::path& path) {
  try {
    json j = json::parse(io::read_text(path));
    return j.at("kept_ids").get<std::vector<uint64_t>>();
  } catch (const json::exception& e) {
    throw NpdError(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

const char* zone_name(Zone z) {
  switch (z) {
    case Zone::Degenerate: return "degenerate";
    case Zone::Proximal: return "proximal";
    case Zone::CognitiveDisconnect: return "cognitive_disconnect";
    case Zone::TeacherUnconfirmed: return "teacher_unconfirmed";
    case Zone::DegenerateLength: return "degenerate_length";
  }
  return "unknown";
}

Zone zone_from_name(const std::string& name) {
  if (name == "degenerate") return Zone::Degenerate;
  if (name == "proximal") return Zone::Proximal;
  if (name == "cognitive_disconnect") return Zone::CognitiveDisconnect;
  if (name == "teacher_unconfirmed") return Zone::TeacherUnconfirmed;
  if (name == "degenerate_length") return Zone::DegenerateLength;
  throw NpdError(ErrorKind::Parse, "unknown zone: " + name);
}

}  // namespace npd
