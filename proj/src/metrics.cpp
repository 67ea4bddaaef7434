#include "npd/metrics.hpp"

#include <sstream>

#include "npd/errors.hpp"
#include "npd/io.hpp"

namespace npd {

namespace {

std::string fmt(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw NpdError(ErrorKind::Input, "cannot open metrics file: " + path.string());
  out_ << kMetricsHeader << "\n";
}

void MetricsWriter::row(const MetricsRow& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.step << ',' << r.epoch << ',' << r.phase << ',' << fmt(r.loss_total) << ','
     << fmt(r.loss_ce) << ',' << fmt(r.loss_kd) << ',' << fmt(r.lr) << ','
     << fmt(r.kl_lag) << ',' << fmt(r.zone_degenerate_frac) << ','
     << fmt(r.zone_proximal_frac) << ',' << fmt(r.zone_disconnect_frac) << ','
     << fmt(r.zone_unconfirmed_frac) << ',' << r.wall_ms;
  out_ << os.str() << "\n";
}

void MetricsWriter::flush() { out_.flush(); }

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  auto lines = io::read_lines(path);
  if (lines.empty() || lines[0] != kMetricsHeader)
    throw NpdError(ErrorKind::Parse, path.string() + ": unexpected metrics header");
  std::vector<MetricsRow> rows;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(lines[li]);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    // a trailing empty cell is dropped by getline; pad back
    while (cells.size() < 13) cells.push_back("");
    try {
      MetricsRow r;
      r.step = std::stoull(cells[0]);
      r.epoch = static_cast<uint32_t>(std::stoul(cells[1]));
      r.phase = cells[2];
      r.loss_total = parse_opt(cells[3]);
      r.loss_ce = parse_opt(cells[4]);
      r.loss_kd = parse_opt(cells[5]);
      r.lr = parse_opt(cells[6]);
      r.kl_lag = parse_opt(cells[7]);
      r.zone_degenerate_frac = parse_opt(cells[8]);
      r.zone_proximal_frac = parse_opt(cells[9]);
      r.zone_disconnect_frac = parse_opt(cells[10]);
      r.zone_unconfirmed_frac = parse_opt(cells[11]);
      r.wall_ms = cells[12].empty() ? 0.0 : std::stod(cells[12]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw NpdError(ErrorKind::Parse, path.string() + ": line " +
                                           std::to_string(li + 1) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace npd
