#include "pidrme/federation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

// Keeps looping while |delta - delta_old| > tau; delta_old starts at +inf, so
// tau = +inf stops after exactly one epoch.
bool keep_training(double delta, double delta_old, double tau) {
  const double change = std::isinf(delta_old) ? std::numeric_limits<double>::infinity() : std::abs(delta - delta_old);
  return change > tau;
}

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::PIDRME: return "PIDRME";
    case Mode::FLRME: return "FLRME";
    case Mode::SRME: return "SRME";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  up.erase(std::remove(up.begin(), up.end(), '-'), up.end());
  if (up == "PIDRME") return Mode::PIDRME;
  if (up == "FLRME") return Mode::FLRME;
  if (up == "SRME") return Mode::SRME;
  throw ValidationError("unknown mode '" + name + "' (expected PIDRME, FLRME or SRME)");
}

void RoundConfig::validate() const {
  require(rounds >= 0, "rounds must be >= 0");
  require(max_local_epochs >= 1, "max_local_epochs must be >= 1");
  require(stop_threshold >= 0, "stop_threshold must be >= 0");
  require(learning_rate >= 0 && std::isfinite(learning_rate), "learning_rate must be finite and >= 0");
  require(clients >= 1, "clients must be >= 1");
  require(workers >= 1, "workers must be >= 1");
  require(client_learning_rates.empty() || static_cast<int>(client_learning_rates.size()) == clients,
          "client_learning_rates must list one rate per client");
  for (double r : client_learning_rates) require(r >= 0 && std::isfinite(r), "client learning rates must be >= 0");
  weights.validate();
}

double RoundConfig::learning_rate_for(int client) const {
  return client_learning_rates.empty() ? learning_rate : client_learning_rates.at(static_cast<std::size_t>(client));
}

void ScenarioConfig::validate() const {
  scene.validate();
  require(test_fraction > 0 && test_fraction < 1, "test_fraction must lie in (0, 1)");
  require(maps_per_client >= 1, "maps_per_client must be >= 1");
  require(tile % kDownsampleFactor == 0, "tile must be divisible by 8");
  const auto tiles = tile_offsets(scene.width, scene.height, tile, stride).size() * static_cast<std::size_t>(maps_per_client);
  require(tiles >= 2, "need at least 2 tiles per client for a train/test split (raise maps_per_client)");
}

ClientData build_client_data(const ScenarioConfig& scenario, int client, std::uint64_t master_seed) {
  scenario.validate();
  const std::uint64_t cseed = mix_seed(master_seed, 5000 + static_cast<std::uint64_t>(client));
  std::mt19937_64 rng(cseed);

  ClientData data;
  data.id = client;
  data.scene_config = scenario.scene;
  if (scenario.heterogeneous) {
    auto& sc = data.scene_config;
    const double theta = sc.exponent_min == sc.exponent_max
                             ? sc.exponent_min
                             : std::uniform_real_distribution<double>(sc.exponent_min, sc.exponent_max)(rng);
    const Index buildings = std::uniform_int_distribution<Index>(sc.buildings_min, sc.buildings_max)(rng);
    sc.exponent_min = sc.exponent_max = theta;
    sc.buildings_min = sc.buildings_max = buildings;
  }
  data.plan = plan_case(scenario.sampling_case, mix_seed(cseed, 1));

  const Scene base = generate_scene(mix_seed(cseed, 2), data.scene_config);
  const auto offsets = tile_offsets(base.width, base.height, scenario.tile, scenario.stride);
  std::vector<TileSample> tiles;
  for (int k = 0; k < scenario.maps_per_client; ++k) {
    const Scene scene =
        k == 0 ? base : resample_transmitters(base, mix_seed(cseed, 10 + static_cast<std::uint64_t>(k)), data.scene_config);
    const RadioMap map = render_radio_map(scene, mix_seed(cseed, 100 + static_cast<std::uint64_t>(k)));
    const auto tx = scene.tx_positions();
    const SparseObservation obs = sample_plan(map, tx, data.plan, mix_seed(cseed, 200 + static_cast<std::uint64_t>(k)));
    LdplFit fit = fit_ldpl(obs);
    const Grid psi = normalize_grid(mbi_upsample(fit.params, tx, map.width(), map.height()));
    data.fits.push_back(std::move(fit));
    for (const auto& o : offsets) {
      TileSample t;
      t.input = rasterize_input(crop_observation(obs, o, scenario.tile));
      t.truth_dbm = map.values.block(o.row, o.col, scenario.tile, scenario.tile);
      t.truth = normalize_grid(t.truth_dbm);
      t.psi = psi.block(o.row, o.col, scenario.tile, scenario.tile);
      tiles.push_back(std::move(t));
    }
  }

  const auto order = shuffled_order(tiles.size(), rng);
  auto n_test = static_cast<std::size_t>(round_half_up(scenario.test_fraction * static_cast<double>(tiles.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, tiles.size() - 1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? data.test : data.train).push_back(std::move(tiles[order[i]]));
  }
  return data;
}

ClientState make_client(std::shared_ptr<const ClientData> data, const RoundConfig& cfg) {
  ClientState c;
  c.id = data->id;
  c.data = std::move(data);
  c.common = common_net().init_params(mix_seed(cfg.seed, 100));
  c.individual = individual_net().init_params(mix_seed(cfg.seed, 200));
  const double lr = cfg.learning_rate_for(c.id < cfg.clients ? c.id : 0);
  c.common_opt = AdamState<double>::for_params(c.common.joined(), lr);
  c.individual_opt = AdamState<double>::for_params(c.individual.joined(), lr);
  c.rng.seed(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(c.id)));
  return c;
}

IndividualPhaseStats local_train_individual(ClientState& client, const RoundState& /*round*/, const RoundConfig& cfg) {
  const auto& train = client.data->train;
  if (train.empty()) throw Error("client " + std::to_string(client.id) + ": empty training set");

  // The common module is frozen in this phase, so Phi_com is computed once.
  std::vector<Tensord> common_out;
  common_out.reserve(train.size());
  for (const auto& t : train) common_out.push_back(forward_common(client.common, t.input));

  IndividualPhaseStats stats;
  double delta_old = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.max_local_epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t i : shuffled_order(train.size(), client.rng)) {
      AutoencoderNet::Trace trace;
      const Tensord out = forward_individual(client.individual, common_out[i], train[i].input, &trace);
      const LossGrad rec = loss_rec(as_grid(out), train[i].truth);
      sum += rec.value;
      IndividualAE grads = zero_grads(client.individual);
      backward_individual(client.individual, trace, Tensord::from_grid(rec.grad), &grads);
      Params p = client.individual.joined();
      adam_step(p, grads.joined(), client.individual_opt);
      client.individual.assign_joined(p);
    }
    const double delta = sum / static_cast<double>(train.size());
    stats.epochs = epoch;
    stats.loss_rec = delta;
    if (!keep_training(delta, delta_old, cfg.stop_threshold)) break;
    delta_old = delta;
  }
  return stats;
}

CommonPhaseStats local_update_common(ClientState& client, const RoundState& round, const RoundConfig& cfg) {
  const auto& train = client.data->train;
  if (train.empty()) throw Error("client " + std::to_string(client.id) + ": empty training set");
  for (const auto& t : train) {
    if (t.psi.rows() != t.truth.rows() || t.psi.cols() != t.truth.cols()) {
      throw Error("client " + std::to_string(client.id) + ": missing LDPL templates");
    }
  }

  const Params global = client.common.joined();
  CommonPhaseStats stats;
  for (std::size_t i : shuffled_order(train.size(), client.rng)) {
    AutoencoderNet::Trace trace;
    const Tensord out = forward_common(client.common, train[i].input, &trace);
    const LossGrad gra = loss_gra(as_grid(out), train[i].psi);
    CommonAE grads = zero_grads(client.common);
    backward_common(client.common, trace, Tensord::from_grid(Grid(cfg.weights.mu1 * gra.grad)), &grads);

    Params p = client.common.joined();
    ConLoss con = loss_con(p, global, round.prev_locals);
    Params g = grads.joined();
    con.grad *= cfg.weights.mu2;
    g += con.grad;
    adam_step(p, g, client.common_opt);
    client.common.assign_joined(p);

    stats.loss_gra += gra.value;
    stats.loss_con += con.value;
    stats.degenerate = stats.degenerate || con.degenerate;
  }
  stats.loss_gra /= static_cast<double>(train.size());
  stats.loss_con /= static_cast<double>(train.size());
  client.last_common = client.common.joined();
  return stats;
}

IndividualPhaseStats local_train_joint(ClientState& client, const RoundConfig& cfg) {
  const auto& train = client.data->train;
  if (train.empty()) throw Error("client " + std::to_string(client.id) + ": empty training set");

  IndividualPhaseStats stats;
  double delta_old = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.max_local_epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t i : shuffled_order(train.size(), client.rng)) {
      AutoencoderNet::Trace common_trace;
      AutoencoderNet::Trace ind_trace;
      const Tensord com = forward_common(client.common, train[i].input, &common_trace);
      const Tensord out = forward_individual(client.individual, com, train[i].input, &ind_trace);
      const LossGrad rec = loss_rec(as_grid(out), train[i].truth);
      sum += rec.value;

      IndividualAE ind_grads = zero_grads(client.individual);
      const Tensord g_com = backward_individual(client.individual, ind_trace, Tensord::from_grid(rec.grad), &ind_grads);
      CommonAE com_grads = zero_grads(client.common);
      backward_common(client.common, common_trace, g_com, &com_grads);

      Params pi = client.individual.joined();
      adam_step(pi, ind_grads.joined(), client.individual_opt);
      client.individual.assign_joined(pi);
      Params pc = client.common.joined();
      adam_step(pc, com_grads.joined(), client.common_opt);
      client.common.assign_joined(pc);
    }
    const double delta = sum / static_cast<double>(train.size());
    stats.epochs = epoch;
    stats.loss_rec = delta;
    if (!keep_training(delta, delta_old, cfg.stop_threshold)) break;
    delta_old = delta;
  }
  return stats;
}

Params average_params(const std::vector<Params>& trees) {
  if (trees.empty()) throw ValidationError("average: empty list");
  // Running mean: identical inputs reproduce themselves exactly.
  using Vec = Params::Vector;
  Vec mean = trees.front().flatten();
  for (std::size_t i = 1; i < trees.size(); ++i) {
    trees.front().require_same_shape(trees[i]);
    mean += (trees[i].flatten() - mean) / static_cast<double>(i + 1);
  }
  Params out = trees.front();
  out.assign(mean);
  return out;
}

Grid estimate_tile(const ClientState& client, const TileSample& tile) {
  const Tensord com = forward_common(client.common, tile.input);
  return denormalize_grid(as_grid(forward_individual(client.individual, com, tile.input)));
}

double evaluate_rmse(const ClientState& client) {
  const auto& test = client.data->test;
  if (test.empty()) throw Error("client " + std::to_string(client.id) + ": empty test set");
  double sq = 0.0;
  double cells = 0.0;
  for (const auto& t : test) {
    sq += (estimate_tile(client, t) - t.truth_dbm).squaredNorm();
    cells += static_cast<double>(t.truth_dbm.size());
  }
  return std::sqrt(sq / cells);
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  const int w = std::min(workers, n);
  for (int k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      for (int i = k; i < n; i += w) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ExperimentResult run_experiment(const RoundConfig& cfg, const ScenarioConfig& scenario, Mode mode,
                                const RoundObserver& observer) {
  cfg.validate();
  scenario.validate();
  std::vector<std::shared_ptr<const ClientData>> data(static_cast<std::size_t>(cfg.clients));
  parallel_for(cfg.clients, cfg.workers, [&](int s) {
    data[static_cast<std::size_t>(s)] = std::make_shared<const ClientData>(build_client_data(scenario, s, cfg.seed));
  });
  return run_experiment(cfg, data, mode, observer);
}

ExperimentResult run_experiment(const RoundConfig& cfg, const std::vector<std::shared_ptr<const ClientData>>& data,
                                Mode mode, const RoundObserver& observer) {
  cfg.validate();
  require(static_cast<int>(data.size()) == cfg.clients, "run_experiment: need one dataset per client");
  const int n = cfg.clients;
  const auto idx = [](int s) { return static_cast<std::size_t>(s); };

  std::vector<ClientState> clients;
  for (const auto& d : data) clients.push_back(make_client(d, cfg));

  ExperimentResult result;
  Report& report = result.report;
  report.seed = cfg.seed;
  report.config_echo = {{"rounds", std::to_string(cfg.rounds)},
                        {"max_local_epochs", std::to_string(cfg.max_local_epochs)},
                        {"stop_threshold", fmt_double(cfg.stop_threshold)},
                        {"lr", fmt_double(cfg.learning_rate)},
                        {"mu1", fmt_double(cfg.weights.mu1)},
                        {"mu2", fmt_double(cfg.weights.mu2)},
                        {"clients", std::to_string(cfg.clients)},
                        {"seed", std::to_string(cfg.seed)}};
  const std::string name = mode_name(mode);

  RoundState round;
  round.global_encoder = clients.front().common.encoder;

  std::vector<double> initial(idx(n));
  parallel_for(n, cfg.workers, [&](int s) { initial[idx(s)] = evaluate_rmse(clients[idx(s)]); });
  std::vector<double> latest = initial;
  if (observer) observer(mode, round, clients);

  for (int z = 1; z <= cfg.rounds; ++z) {
    round.round = z;
    std::vector<IndividualPhaseStats> ind(idx(n));
    std::vector<CommonPhaseStats> com(idx(n));

    if (mode == Mode::FLRME) {
      parallel_for(n, cfg.workers, [&](int s) { ind[idx(s)] = local_train_joint(clients[idx(s)], cfg); });
      std::vector<Params> enc, dec, ienc, idec;
      for (const auto& c : clients) {
        enc.push_back(c.common.encoder);
        dec.push_back(c.common.decoder);
        ienc.push_back(c.individual.encoder);
        idec.push_back(c.individual.decoder);
        for (auto g : {ParamGroup::CommonEncoder, ParamGroup::CommonDecoder, ParamGroup::Individual}) {
          round.transfers.push_back({z, c.id, g, true});
        }
      }
      const CommonAE common{average_params(enc), average_params(dec)};
      const IndividualAE individual{average_params(ienc), average_params(idec)};
      round.global_encoder = common.encoder;
      for (auto& c : clients) {
        c.common = common;
        c.individual = individual;
        for (auto g : {ParamGroup::CommonEncoder, ParamGroup::CommonDecoder, ParamGroup::Individual}) {
          round.transfers.push_back({z, c.id, g, false});
        }
      }
    } else {
      // SRME: every client is its own federation of one.
      std::vector<RoundState> views;
      if (mode == Mode::SRME) {
        for (const auto& c : clients) {
          RoundState v;
          v.round = z;
          v.global_encoder = c.common.encoder;
          if (c.last_common) v.prev_locals.push_back(*c.last_common);
          views.push_back(std::move(v));
        }
      }
      const auto view = [&](int s) -> const RoundState& { return mode == Mode::SRME ? views[idx(s)] : round; };

      parallel_for(n, cfg.workers, [&](int s) { ind[idx(s)] = local_train_individual(clients[idx(s)], view(s), cfg); });
      parallel_for(n, cfg.workers, [&](int s) { com[idx(s)] = local_update_common(clients[idx(s)], view(s), cfg); });

      if (mode == Mode::PIDRME) {
        std::vector<Params> encoders;
        round.prev_locals.clear();
        for (const auto& c : clients) {
          encoders.push_back(c.common.encoder);
          round.prev_locals.push_back(*c.last_common);
          round.transfers.push_back({z, c.id, ParamGroup::CommonEncoder, true});
          round.transfers.push_back({z, c.id, ParamGroup::CommonDecoder, true});
        }
        round.global_encoder = average_encoders(encoders);
        for (auto& c : clients) {
          c.common.encoder = round.global_encoder;
          round.transfers.push_back({z, c.id, ParamGroup::CommonEncoder, false});
        }
      }
    }

    if (mode != Mode::FLRME) {
      for (const auto& t : round.transfers) {
        if (t.group == ParamGroup::Individual) {
          throw std::logic_error("ownership audit: individual parameters of client " + std::to_string(t.client) +
                                 " left the client in round " + std::to_string(t.round));
        }
      }
    }

    parallel_for(n, cfg.workers, [&](int s) { latest[idx(s)] = evaluate_rmse(clients[idx(s)]); });
    for (int s = 0; s < n; ++s) {
      report.rows.push_back({name, clients[idx(s)].id, z, ind[idx(s)].loss_rec, com[idx(s)].loss_gra,
                             com[idx(s)].loss_con, latest[idx(s)]});
    }
    if (observer) observer(mode, round, clients);
  }

  for (int s = 0; s < n; ++s) report.summaries.push_back({name, clients[idx(s)].id, initial[idx(s)], latest[idx(s)]});
  result.transfers = round.transfers;
  return result;
}

}  // namespace pidrme
