#include "pidrme/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pidrme/error.hpp"
#include "pidrme/gradcheck_suite.hpp"
#include "pidrme/ldpl.hpp"
#include "pidrme/report.hpp"

namespace pidrme {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& domain, const std::string& got) {
  throw ValidationError("invalid value for '" + key + "': expected " + domain + " (got '" + got + "')");
}

long long to_int(const std::string& key, const std::string& v, long long lo, long long hi, const std::string& domain) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || out < lo || out > hi) bad(key, domain, v);
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad(key, "unsigned 64-bit integer", v);
  return out;
}

double to_real(const std::string& key, const std::string& v, double lo, double hi, const std::string& domain,
               bool allow_inf = false) {
  double out = 0.0;
  std::size_t used = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad(key, domain, v);
  }
  if (used != v.size() || std::isnan(out)) bad(key, domain, v);
  if (std::isinf(out) && !(allow_inf && out > 0)) bad(key, domain, v);
  if (out < lo || out > hi) bad(key, domain, v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  bad(key, "boolean (true/false)", v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

constexpr long long kBig = std::numeric_limits<int>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct KeyHandler {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string join_modes(const std::vector<Mode>& modes) {
  std::string out;
  for (std::size_t i = 0; i < modes.size(); ++i) out += (i ? "," : "") + mode_name(modes[i]);
  return out;
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

// Integer key bound to a field of any integral type.
template <typename Field>
KeyHandler int_key(std::string name, std::string help, long long lo, Field field) {
  const std::string domain = "integer >= " + std::to_string(lo);
  return {name, help,
          [=](ExperimentConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(field(c))>;
            field(c) = static_cast<T>(to_int(name, v, lo, kBig, domain));
          },
          [=](const ExperimentConfig& c) { return std::to_string(field(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Field>
KeyHandler real_key(std::string name, std::string help, double lo, double hi, std::string domain, Field field,
                    bool allow_inf = false) {
  return {name, help,
          [=](ExperimentConfig& c, const std::string& v) { field(c) = to_real(name, v, lo, hi, domain, allow_inf); },
          [=](const ExperimentConfig& c) { return fmt(field(const_cast<ExperimentConfig&>(c))); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    t.push_back({"case", "sampling case: 1 (12.5%), 2 (uniform 1-10% per client), 3 (1% left half, 10% right half)",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.scenario.sampling_case = static_cast<SamplingCase>(to_int("case", v, 1, 3, "one of 1, 2, 3"));
                 },
                 [](const ExperimentConfig& c) { return std::to_string(static_cast<int>(c.scenario.sampling_case)); }});
    t.push_back(int_key("clients", "number of clients S", 1, [](ExperimentConfig& c) -> int& { return c.round.clients; }));
    t.push_back(int_key("rounds", "communication rounds Z", 0, [](ExperimentConfig& c) -> int& { return c.round.rounds; }));
    t.push_back(int_key("max_local_epochs", "local epoch cap T_max", 1,
                        [](ExperimentConfig& c) -> int& { return c.round.max_local_epochs; }));
    t.push_back(real_key("stop_threshold", "local stopping threshold on the change of the epoch loss", 0.0, kInf,
                         "real >= 0 (inf allowed)",
                         [](ExperimentConfig& c) -> double& { return c.round.stop_threshold; }, true));
    t.push_back(real_key("lr", "learning rate for every client", 0.0, kInf, "finite real >= 0",
                         [](ExperimentConfig& c) -> double& { return c.round.learning_rate; }));
    t.push_back({"client_lr", "comma-separated per-client learning rates (empty: use lr)",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.round.client_learning_rates.clear();
                   for (const auto& item : split_list(v)) {
                     c.round.client_learning_rates.push_back(
                         to_real("client_lr", item, 0.0, kInf, "comma-separated finite reals >= 0"));
                   }
                 },
                 [](const ExperimentConfig& c) { return join_reals(c.round.client_learning_rates); }});
    t.push_back(real_key("mu1", "weight of the gradient loss", 0.0, kInf, "finite real >= 0",
                         [](ExperimentConfig& c) -> double& { return c.round.weights.mu1; }));
    t.push_back(real_key("mu2", "weight of the constraint loss", 0.0, kInf, "finite real >= 0",
                         [](ExperimentConfig& c) -> double& { return c.round.weights.mu2; }));
    t.push_back({"seed", "master seed",
                 [](ExperimentConfig& c, const std::string& v) { c.round.seed = to_u64("seed", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.round.seed); }});
    t.push_back(int_key("workers", "worker threads (results do not depend on it)", 1,
                        [](ExperimentConfig& c) -> int& { return c.round.workers; }));
    t.push_back({"modes", "comma-separated subset of PIDRME, FLRME, SRME",
                 [](ExperimentConfig& c, const std::string& v) {
                   std::vector<Mode> modes;
                   for (const auto& item : split_list(v)) {
                     Mode m{};
                     try {
                       m = parse_mode(item);
                     } catch (const ValidationError&) {
                       bad("modes", "comma-separated subset of PIDRME, FLRME, SRME", v);
                     }
                     if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
                   }
                   if (modes.empty()) bad("modes", "at least one of PIDRME, FLRME, SRME", v);
                   c.modes = modes;
                 },
                 [](const ExperimentConfig& c) { return join_modes(c.modes); }});
    t.push_back({"output", "output directory",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v.empty()) bad("output", "non-empty path", v);
                   c.output_dir = v;
                 },
                 [](const ExperimentConfig& c) { return c.output_dir.string(); }});
    t.push_back({"map_size", "side of the square synthetic maps in cells",
                 [](ExperimentConfig& c, const std::string& v) {
                   const auto n = static_cast<Index>(to_int("map_size", v, 16, kBig, "integer >= 16"));
                   c.scenario.scene.width = n;
                   c.scenario.scene.height = n;
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.scenario.scene.width); }});
    t.push_back({"tile", "tile side in cells",
                 [](ExperimentConfig& c, const std::string& v) {
                   const auto n = to_int("tile", v, 8, kBig, "positive multiple of 8");
                   if (n % kDownsampleFactor != 0) bad("tile", "positive multiple of 8", v);
                   c.scenario.tile = static_cast<Index>(n);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.scenario.tile); }});
    t.push_back(int_key("stride", "tiling stride in cells", 1, [](ExperimentConfig& c) -> Index& { return c.scenario.stride; }));
    t.push_back(int_key("maps_per_client", "synthetic maps per client", 1,
                        [](ExperimentConfig& c) -> int& { return c.scenario.maps_per_client; }));
    t.push_back({"test_fraction", "fraction of each client's tiles held out for testing",
                 [](ExperimentConfig& c, const std::string& v) {
                   const double f = to_real("test_fraction", v, 0.0, 1.0, "real in (0, 1)");
                   if (f <= 0.0 || f >= 1.0) bad("test_fraction", "real in (0, 1)", v);
                   c.scenario.test_fraction = f;
                 },
                 [](const ExperimentConfig& c) { return fmt(c.scenario.test_fraction); }});
    t.push_back(int_key("tx_min", "minimum transmitters per map", 1,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.tx_min; }));
    t.push_back(int_key("tx_max", "maximum transmitters per map", 1,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.tx_max; }));
    t.push_back(real_key("power_dbm", "transmit power in dBm", -kInf, kInf, "finite real",
                         [](ExperimentConfig& c) -> double& { return c.scenario.scene.power_dbm; }));
    t.push_back(real_key("exponent_min", "minimum pathloss exponent", 0.5, 8.0, "real in [0.5, 8]",
                         [](ExperimentConfig& c) -> double& { return c.scenario.scene.exponent_min; }));
    t.push_back(real_key("exponent_max", "maximum pathloss exponent", 0.5, 8.0, "real in [0.5, 8]",
                         [](ExperimentConfig& c) -> double& { return c.scenario.scene.exponent_max; }));
    t.push_back(int_key("buildings_min", "minimum buildings per map", 0,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.buildings_min; }));
    t.push_back(int_key("buildings_max", "maximum buildings per map", 0,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.buildings_max; }));
    t.push_back(int_key("building_size_min", "minimum building side in cells", 1,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.building_size_min; }));
    t.push_back(int_key("building_size_max", "maximum building side in cells", 1,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.building_size_max; }));
    t.push_back(real_key("noise_sigma_db", "measurement noise standard deviation in dB", 0.0, kInf, "finite real >= 0",
                         [](ExperimentConfig& c) -> double& { return c.scenario.scene.noise_sigma_db; }));
    t.push_back(real_key("shadow_loss_db", "attenuation per occluding building in dB", 0.0, kInf, "finite real >= 0",
                         [](ExperimentConfig& c) -> double& { return c.scenario.scene.shadow_loss_db; }));
    t.push_back(int_key("max_shadowing", "cap on occluding buildings counted per ray", 0,
                        [](ExperimentConfig& c) -> Index& { return c.scenario.scene.max_shadowing_buildings; }));
    t.push_back({"heterogeneous", "draw one pathloss exponent and building count per client",
                 [](ExperimentConfig& c, const std::string& v) { c.scenario.heterogeneous = to_bool("heterogeneous", v); },
                 [](const ExperimentConfig& c) { return std::string(c.scenario.heterogeneous ? "true" : "false"); }});
    return t;
  }();
  return table;
}

const KeyHandler& find_handler(const std::string& key) {
  for (const auto& h : handlers()) {
    if (h.name == key) return h;
  }
  std::string known;
  for (const auto& h : handlers()) known += (known.empty() ? "" : ", ") + h.name;
  throw ValidationError("unknown key '" + key + "' (expected one of: " + known + ")");
}

void validate_config(const ExperimentConfig& c) {
  try {
    c.round.validate();
    c.round.weights.validate();
    c.scenario.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("invalid configuration: ") + e.what());
  }
  if (c.modes.empty()) throw ValidationError("invalid value for 'modes': expected at least one mode");
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void prepare_output(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string echo_text(const ExperimentConfig& config) {
  std::string text;
  for (const auto& [k, v] : describe(config)) {
    if (k == "workers" || k == "output") continue;
    text += k + " = " + v + "\n";
  }
  return text;
}

int cmd_run(const ExperimentConfig& config, std::ostream& out) {
  prepare_output(config.output_dir);
  std::vector<std::shared_ptr<const ClientData>> data;
  for (int s = 0; s < config.round.clients; ++s) {
    data.push_back(std::make_shared<const ClientData>(build_client_data(config.scenario, s, config.round.seed)));
  }
  Report all;
  all.seed = config.round.seed;
  for (const auto& [k, v] : describe(config)) {
    if (k != "workers" && k != "output") all.config_echo.emplace_back(k, v);
  }
  for (Mode mode : config.modes) {
    std::optional<Grid> estimate;
    RoundObserver grab = [&](Mode, const RoundState& round, const std::vector<ClientState>& clients) {
      if (round.round == config.round.rounds && !clients.front().data->test.empty()) {
        estimate = estimate_tile(clients.front(), clients.front().data->test.front());
      }
    };
    ExperimentResult r = run_experiment(config.round, data, mode, grab);
    all.append(r.report);
    out << mode_name(mode) << ": mean test RMSE " << std::setprecision(6) << r.report.aggregate_rmse(mode_name(mode))
        << " dB\n";
    if (estimate) {
      export_heatmap(RadioMap(*estimate), config.output_dir / ("estimate_" + mode_name(mode) + "_client0.pgm"));
    }
  }
  const TileSample& first = data.front()->test.front();
  export_heatmap(RadioMap(first.truth_dbm), config.output_dir / "truth_client0.pgm");
  export_heatmap(RadioMap(denormalize_grid(first.psi)), config.output_dir / "template_client0.pgm");
  export_metrics(all, config.output_dir / "metrics.csv");
  export_summary(all, config.output_dir / "summary.csv");
  write_file(config.output_dir / "config.txt", echo_text(config));
  out << "wrote " << (config.output_dir / "metrics.csv").string() << '\n';
  return 0;
}

Scene demo_scene(const ExperimentConfig& config) { return generate_scene(config.round.seed, config.scenario.scene); }

int cmd_fit_ldpl(const ExperimentConfig& config, std::ostream& out) {
  const Scene scene = demo_scene(config);
  const RadioMap map = render_radio_map(scene, mix_seed(config.round.seed, 1));
  const auto tx = scene.tx_positions();
  const SparseObservation obs = sample_case(map, tx, config.scenario.sampling_case, mix_seed(config.round.seed, 2));
  const LdplFit fit = fit_ldpl(obs);
  out << std::setprecision(10);
  out << "samples " << obs.samples.size() << "\n";
  for (std::size_t m = 0; m < fit.params.size(); ++m) {
    out << "tx " << m << " at (" << tx[m].row << ", " << tx[m].col << "): alpha " << fit.params.alpha[m] << " dBm, theta "
        << fit.params.theta[m] << " (true exponent " << scene.transmitters[m].exponent << ")\n";
  }
  out << "residual " << fit.residual << " (initial " << fit.initial_residual << ")\n";
  out << "iterations " << fit.iterations << (fit.closed_form ? " closed-form" : "")
      << (fit.converged ? "" : " not converged") << "\n";
  const Template psi = mbi_upsample(fit.params, tx, map.width(), map.height());
  out << "template RMSE " << rmse(map.values, psi) << " dB\n";
  prepare_output(config.output_dir);
  export_heatmap(RadioMap(psi), config.output_dir / "mbi_template.pgm");
  return 0;
}

int cmd_render(const ExperimentConfig& config, std::ostream& out) {
  const Scene scene = demo_scene(config);
  const RadioMap map = render_radio_map(scene, mix_seed(config.round.seed, 1));
  prepare_output(config.output_dir);
  const auto path = config.output_dir / "radio_map.pgm";
  export_heatmap(map, path);
  out << "scene: " << scene.transmitters.size() << " transmitters, " << scene.buildings.size() << " buildings\n";
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& config, std::ostream& out) {
  GradCheckSuiteOptions opts;
  opts.seed = config.round.seed;
  const GradCheckReport report = run_gradcheck_suite(opts);
  out << std::setprecision(3);
  for (const auto& c : report.cases) {
    out << (c.passed() ? "ok   " : "FAIL ") << c.name << ": max relative error " << std::scientific
        << c.result.max_rel_error << " (threshold " << c.threshold << ", " << std::defaultfloat << c.result.checked
        << " entries, " << c.result.skipped << " across a kink)\n";
  }
  out << "max relative error " << std::scientific << report.max_rel_error() << std::defaultfloat << " in "
      << std::fixed << report.seconds << " s\n";
  return report.passed() ? 0 : 2;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  scenario.scene.width = 64;
  scenario.scene.height = 64;
  scenario.tile = 64;
  scenario.stride = 32;
  scenario.maps_per_client = 6;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    const ExperimentConfig defaults;
    for (const auto& h : handlers()) out.push_back({h.name, h.get(defaults), h.help});
    return out;
  }();
  return keys;
}

KeyValues read_config_text(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(number) + ": missing key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return read_config_text(text.str());
}

ExperimentConfig parse_config(const KeyValues& file, const KeyValues& overrides) {
  ExperimentConfig config;
  for (const auto* list : {&file, &overrides}) {
    for (const auto& [key, value] : *list) find_handler(key).set(config, value);
  }
  validate_config(config);
  return config;
}

KeyValues describe(const ExperimentConfig& config) {
  KeyValues out;
  for (const auto& h : handlers()) out.emplace_back(h.name, h.get(config));
  return out;
}

int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate_config(config);
    if (command == "run") return cmd_run(config, out);
    if (command == "fit-ldpl") return cmd_fit_ldpl(config, out);
    if (command == "render") return cmd_render(config, out);
    if (command == "gradcheck") return cmd_gradcheck(config, out);
    err << "error: unknown command '" << command << "' (expected run, fit-ldpl, gradcheck or render)\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace pidrme
