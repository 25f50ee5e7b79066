#include "pidrme/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

double Report::aggregate_rmse(const std::string& mode) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : summaries) {
    if (s.mode == mode) {
      sum += s.final_rmse_db;
      ++n;
    }
  }
  if (n == 0) throw ValidationError("report has no results for mode " + mode);
  return sum / n;
}

std::vector<std::string> Report::modes() const {
  std::vector<std::string> out;
  for (const auto& s : summaries) {
    if (std::find(out.begin(), out.end(), s.mode) == out.end()) out.push_back(s.mode);
  }
  return out;
}

void Report::append(const Report& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  summaries.insert(summaries.end(), other.summaries.begin(), other.summaries.end());
  for (const auto& kv : other.config_echo) {
    if (std::find(config_echo.begin(), config_echo.end(), kv) == config_echo.end()) config_echo.push_back(kv);
  }
}

std::string metrics_csv(const Report& report) {
  std::vector<MetricRow> rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.mode, a.client, a.round) < std::tie(b.mode, b.client, b.round);
  });
  std::ostringstream out;
  out << std::setprecision(17);
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.mode << ',' << r.client << ',' << r.round << ',' << r.loss_rec << ',' << r.loss_gra << ',' << r.loss_con
        << ',' << r.test_rmse_db << '\n';
  }
  return out.str();
}

void export_metrics(const Report& report, const std::filesystem::path& path) { write_text(metrics_csv(report), path); }

std::string summary_csv(const Report& report) {
  std::vector<ClientSummary> rows = report.summaries;
  std::stable_sort(rows.begin(), rows.end(), [](const ClientSummary& a, const ClientSummary& b) {
    return std::tie(a.mode, a.client) < std::tie(b.mode, b.client);
  });
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mode,client,initial_rmse_db,final_rmse_db\n";
  for (const auto& s : rows) out << s.mode << ',' << s.client << ',' << s.initial_rmse_db << ',' << s.final_rmse_db << '\n';
  auto modes = report.modes();
  std::sort(modes.begin(), modes.end());
  for (const auto& m : modes) {
    double initial = 0.0;
    int n = 0;
    for (const auto& s : rows) {
      if (s.mode == m) {
        initial += s.initial_rmse_db;
        ++n;
      }
    }
    out << m << ",-1," << initial / n << ',' << report.aggregate_rmse(m) << '\n';
  }
  return out.str();
}

void export_summary(const Report& report, const std::filesystem::path& path) { write_text(summary_csv(report), path); }

void export_heatmap(const RadioMap& map, const std::filesystem::path& path) { export_pgm(map, path); }

}  // namespace pidrme
