#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pidrme/losses.hpp"
#include "pidrme/pgm.hpp"
#include "pidrme/scene.hpp"

namespace pidrme {

/// sqrt(||truth - estimate||_F^2 / cells), single frequency.
template <typename A, typename B>
double rmse(const Eigen::MatrixBase<A>& truth, const Eigen::MatrixBase<B>& estimate) {
  require_same_extent(truth, estimate, "rmse");
  if (truth.size() == 0) throw ShapeError("rmse: empty grids");
  return std::sqrt((truth - estimate).squaredNorm() / static_cast<double>(truth.size()));
}

inline double rmse(const RadioMap& truth, const RadioMap& estimate) { return rmse(truth.values, estimate.values); }

struct MetricRow {
  std::string mode;
  int client = 0;
  int round = 0;
  double loss_rec = 0.0;
  double loss_gra = 0.0;
  double loss_con = 0.0;
  double test_rmse_db = 0.0;
};

struct ClientSummary {
  std::string mode;
  int client = 0;
  double initial_rmse_db = 0.0;
  double final_rmse_db = 0.0;
};

struct Report {
  std::vector<MetricRow> rows;
  std::vector<ClientSummary> summaries;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::uint64_t seed = 0;

  /// Mean over clients of the final test RMSE for one mode.
  double aggregate_rmse(const std::string& mode) const;
  std::vector<std::string> modes() const;
  void append(const Report& other);
};

inline constexpr const char* kMetricsHeader = "mode,client,round,loss_rec,loss_gra,loss_con,test_rmse_db";

/// CSV sorted by (mode, client, round), 17 significant digits.
std::string metrics_csv(const Report& report);
void export_metrics(const Report& report, const std::filesystem::path& path);

/// mode,client,initial_rmse_db,final_rmse_db followed by one aggregate row per mode (client = -1).
std::string summary_csv(const Report& report);
void export_summary(const Report& report, const std::filesystem::path& path);

/// PGM heatmap using the global dBm quantization.
void export_heatmap(const RadioMap& map, const std::filesystem::path& path);

}  // namespace pidrme
