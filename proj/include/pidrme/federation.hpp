#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pidrme/adam.hpp"
#include "pidrme/ldpl.hpp"
#include "pidrme/losses.hpp"
#include "pidrme/model.hpp"
#include "pidrme/report.hpp"
#include "pidrme/sampling.hpp"
#include "pidrme/scene.hpp"

namespace pidrme {

enum class Mode { PIDRME, FLRME, SRME };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct RoundConfig {
  int rounds = 30;              // Z
  int max_local_epochs = 5;     // T_max
  double stop_threshold = 1e-4; // tau, on the change of the mean epoch L_rec
  double learning_rate = 1e-3;  // eta_s unless overridden per client
  std::vector<double> client_learning_rates;
  LossWeights weights;
  int clients = 4;  // S
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
  double learning_rate_for(int client) const;
};

struct ScenarioConfig {
  SceneConfig scene;  // full map extents before tiling
  SamplingCase sampling_case = SamplingCase::Case1;
  Index tile = 64;
  Index stride = 32;
  int maps_per_client = 1;
  double test_fraction = 0.2;
  // Each client draws one pathloss exponent and one building count inside the
  // configured ranges, so clients differ in propagation and layout.
  bool heterogeneous = true;

  void validate() const;
};

/// One training/evaluation unit: a tile with its input, ground truth and template.
struct TileSample {
  InputTensor input;
  Grid truth;      // normalized [0, 1]
  Grid truth_dbm;  // dBm
  Grid psi;        // normalized LDPL template
};

struct ClientData {
  int id = 0;
  SceneConfig scene_config;
  SamplingPlan plan;
  std::vector<LdplFit> fits;  // one per map
  std::vector<TileSample> train;
  std::vector<TileSample> test;
};

/// Deterministic in (scenario, client, master_seed); independent of the client count.
ClientData build_client_data(const ScenarioConfig& scenario, int client, std::uint64_t master_seed);

struct ClientState {
  int id = 0;
  std::shared_ptr<const ClientData> data;
  CommonAE common;
  IndividualAE individual;
  AdamState<double> common_opt;
  AdamState<double> individual_opt;
  std::optional<Params> last_common;  // encoder + decoder after the last common update
  std::mt19937_64 rng;
};

ClientState make_client(std::shared_ptr<const ClientData> data, const RoundConfig& cfg);

enum class ParamGroup { CommonEncoder, CommonDecoder, Individual };

/// One parameter-group movement between a client and the (simulated) server.
struct Transfer {
  int round = 0;
  int client = 0;
  ParamGroup group = ParamGroup::CommonEncoder;
  bool upload = true;
};

struct RoundState {
  int round = 0;  // z, 1-based once training starts
  Params global_encoder;
  std::vector<Params> prev_locals;  // every client's common params after round z-1
  std::vector<Transfer> transfers;
};

struct IndividualPhaseStats {
  int epochs = 0;
  double loss_rec = 0.0;  // mean over the last epoch
};

struct CommonPhaseStats {
  double loss_gra = 0.0;
  double loss_con = 0.0;
  bool degenerate = false;
};

/// Epochs of L_rec descent on the individual module only, until the change of
/// the epoch-mean loss is <= tau or T_max epochs have run.
IndividualPhaseStats local_train_individual(ClientState& client, const RoundState& round, const RoundConfig& cfg);

/// One pass of mu1 * L_gra + mu2 * L_con descent on the common module
/// (encoder and decoder); snapshots the result into `last_common`.
CommonPhaseStats local_update_common(ClientState& client, const RoundState& round, const RoundConfig& cfg);

/// FL-RME local step: L_rec descent on all parameters, same stopping rule.
IndividualPhaseStats local_train_joint(ClientState& client, const RoundConfig& cfg);

/// Element-wise mean, accumulated in list order.
Params average_params(const std::vector<Params>& trees);
inline Params average_encoders(const std::vector<Params>& encoders) { return average_params(encoders); }

/// Full-model estimate of one tile, in dBm.
Grid estimate_tile(const ClientState& client, const TileSample& tile);

/// Pooled test RMSE in dBm over the client's held-out tiles.
double evaluate_rmse(const ClientState& client);

/// Called after every round's broadcast (and once after initialization with round = 0).
using RoundObserver = std::function<void(Mode, const RoundState&, const std::vector<ClientState>&)>;

struct ExperimentResult {
  Report report;
  std::vector<Transfer> transfers;
};

ExperimentResult run_experiment(const RoundConfig& cfg, const ScenarioConfig& scenario, Mode mode,
                                const RoundObserver& observer = {});

/// Same, reusing already built client datasets (one per client, in order).
ExperimentResult run_experiment(const RoundConfig& cfg, const std::vector<std::shared_ptr<const ClientData>>& data,
                                Mode mode, const RoundObserver& observer = {});

/// Runs fn(0..n-1) on up to `workers` threads; order of side effects per index is fixed.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace pidrme
