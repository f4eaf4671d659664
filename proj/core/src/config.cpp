#include "pdafpf/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pdafpf/errors.hpp"

namespace pdafpf {

using nlohmann::json;

namespace {

template <typename Enum>
struct Names {
  Enum value;
  const char* text;
};

constexpr Names<ScenarioKind> kKindNames[] = {{ScenarioKind::kPdaClutter, "pda-clutter"},
                                             {ScenarioKind::kJpdaTwoTarget, "jpda-two-target"},
                                             {ScenarioKind::kLinear1d, "linear-1d"},
                                             {ScenarioKind::kCustom, "custom"}};
constexpr Names<AssociationMode> kAssocNames[] = {{AssociationMode::kSde, "sde"},
                                                 {AssociationMode::kBayes, "bayes"},
                                                 {AssociationMode::kKnown, "known"}};
constexpr Names<GainMode> kGainNames[] = {{GainMode::kLinear, "linear"},
                                         {GainMode::kIntegral1d, "integral-1d"},
                                         {GainMode::kConstantApprox, "constant-approx"}};
constexpr Names<ClutterModel> kClutterNames[] = {{ClutterModel::kNoise, "noise"},
                                                {ClutterModel::kUniform, "uniform"}};

template <typename Enum, std::size_t N>
std::string name_of(const Names<Enum> (&table)[N], Enum value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.text;
  }
  return "?";
}

template <typename Enum, std::size_t N>
Enum parse_name(const Names<Enum> (&table)[N], std::string_view text, const char* field) {
  std::string allowed;
  for (const auto& entry : table) {
    if (text == entry.text) return entry.value;
    allowed += allowed.empty() ? "" : "|";
    allowed += entry.text;
  }
  throw ConfigError(std::string(field) + ": unknown value '" + std::string(text) + "' (expected " + allowed + ")");
}

void reject_unknown(const json& object, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!object.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : object.items()) {
    if (!names.contains(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field + ": expected a number");
  return j.get<double>();
}

Vector get_vector(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = get_number(j[i], field);
  return v;
}

Matrix get_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = get_vector(j[static_cast<std::size_t>(r)], field);
    if (row.size() != cols) throw ConfigError(field + ": rows must have equal length");
    m.row(r) = row.transpose();
  }
  return m;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vector(m.row(r).transpose())));
  return out;
}

ModelSpec parse_model(const json& j) {
  reject_unknown(j, {"drift", "drift_matrix", "diffusion", "observation", "observation_row", "obs_noise"}, "model");
  ModelSpec spec;
  if (j.contains("drift")) spec.drift = j.at("drift").get<std::string>();
  if (j.contains("drift_matrix")) spec.drift_matrix = get_matrix(j.at("drift_matrix"), "model.drift_matrix");
  if (!j.contains("diffusion")) throw ConfigError("model.diffusion is required");
  spec.diffusion = get_vector(j.at("diffusion"), "model.diffusion");
  if (j.contains("observation")) spec.observation = j.at("observation").get<std::string>();
  if (j.contains("observation_row")) {
    spec.observation_row = get_vector(j.at("observation_row"), "model.observation_row").transpose();
  }
  if (!j.contains("obs_noise")) throw ConfigError("model.obs_noise is required");
  spec.obs_noise = get_number(j.at("obs_noise"), "model.obs_noise");
  return spec;
}

TargetSpec parse_target(const json& j, std::size_t index) {
  const std::string where = "targets[" + std::to_string(index) + "]";
  reject_unknown(j, {"initial", "prior_mean", "prior_cov"}, where);
  TargetSpec spec;
  if (j.contains("initial") && !j.at("initial").is_null()) {
    spec.initial = get_vector(j.at("initial"), where + ".initial");
  }
  if (!j.contains("prior_mean") || !j.contains("prior_cov")) {
    throw ConfigError(where + ": prior_mean and prior_cov are required");
  }
  spec.prior_mean = get_vector(j.at("prior_mean"), where + ".prior_mean");
  spec.prior_cov = get_matrix(j.at("prior_cov"), where + ".prior_cov");
  return spec;
}

ScenarioConfig from_json(const json& j) {
  reject_unknown(j,
                 {"name", "kind", "model", "targets", "channels", "rate", "clutter", "dt", "horizon",
                  "particles", "seed", "association", "gain", "gain_stride", "bandwidth",
                  "initial_association", "always_detected", "initial_belief", "oracles", "grid_cells", "threads"},
                 "config");
  ScenarioConfig c;
  if (j.contains("name")) c.name = j.at("name").get<std::string>();
  if (j.contains("kind")) c.kind = parse_name(kKindNames, j.at("kind").get<std::string>(), "kind");
  if (!j.contains("model")) throw ConfigError("config: model is required");
  c.model = parse_model(j.at("model"));
  if (!j.contains("targets") || !j.at("targets").is_array()) throw ConfigError("config: targets array is required");
  for (std::size_t i = 0; i < j.at("targets").size(); ++i) c.targets.push_back(parse_target(j.at("targets")[i], i));
  if (j.contains("channels")) c.channels = j.at("channels").get<int>();
  if (j.contains("rate")) c.rate = get_number(j.at("rate"), "rate");
  if (j.contains("clutter")) {
    const json& cl = j.at("clutter");
    reject_unknown(cl, {"model", "volume", "center"}, "clutter");
    if (cl.contains("model")) c.clutter.model = parse_name(kClutterNames, cl.at("model").get<std::string>(), "clutter.model");
    if (cl.contains("volume")) c.clutter.volume = get_number(cl.at("volume"), "clutter.volume");
    if (cl.contains("center")) c.clutter.center = get_number(cl.at("center"), "clutter.center");
  }
  if (j.contains("dt")) c.dt = get_number(j.at("dt"), "dt");
  if (j.contains("horizon")) c.horizon = get_number(j.at("horizon"), "horizon");
  if (j.contains("particles")) c.particles = j.at("particles").get<Eigen::Index>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("association")) c.association = parse_association_mode(j.at("association").get<std::string>());
  if (j.contains("gain")) c.gain = parse_gain_mode(j.at("gain").get<std::string>());
  if (j.contains("gain_stride")) c.gain_stride = j.at("gain_stride").get<int>();
  if (j.contains("bandwidth")) c.bandwidth = get_number(j.at("bandwidth"), "bandwidth");
  if (j.contains("initial_association") && !j.at("initial_association").is_null()) {
    c.initial_association = j.at("initial_association").get<int>();
  }
  if (j.contains("always_detected")) c.always_detected = j.at("always_detected").get<bool>();
  if (j.contains("initial_belief")) {
    const Vector b = get_vector(j.at("initial_belief"), "initial_belief");
    c.initial_belief.assign(b.data(), b.data() + b.size());
  }
  if (j.contains("oracles")) {
    const json& o = j.at("oracles");
    reject_unknown(o, {"kalman", "grid", "wonham", "bayes"}, "oracles");
    c.oracles.kalman = o.value("kalman", false);
    c.oracles.grid = o.value("grid", false);
    c.oracles.wonham = o.value("wonham", false);
    c.oracles.bayes = o.value("bayes", false);
  }
  if (j.contains("grid_cells")) c.grid_cells = j.at("grid_cells").get<int>();
  if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  c.validate();
  return c;
}

bool is_psd(const Matrix& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  return eig.eigenvalues().minCoeff() >= -1e-12;
}

}  // namespace

std::string to_string(ScenarioKind kind) { return name_of(kKindNames, kind); }
std::string to_string(AssociationMode mode) { return name_of(kAssocNames, mode); }
std::string to_string(GainMode mode) { return name_of(kGainNames, mode); }
std::string to_string(ClutterModel model) { return name_of(kClutterNames, model); }
AssociationMode parse_association_mode(std::string_view text) {
  return parse_name(kAssocNames, text, "association");
}
GainMode parse_gain_mode(std::string_view text) { return parse_name(kGainNames, text, "gain"); }

long ScenarioConfig::steps() const { return static_cast<long>(std::llround(horizon / dt)); }

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
  if (!(horizon >= dt) || !std::isfinite(horizon)) fail("horizon must be >= dt");
  if (std::abs(horizon / dt - static_cast<double>(steps())) > 1e-6) fail("horizon must be a multiple of dt");
  if (particles < 2) fail("particles must be >= 2");
  if (!(rate >= 0.0) || !std::isfinite(rate)) fail("rate must be >= 0");
  if (gain_stride < 1) fail("gain_stride must be >= 1");
  if (bandwidth < 0.0) fail("bandwidth must be >= 0 (0 selects Silverman's rule)");
  if (grid_cells < 3) fail("grid_cells must be >= 3");
  if (threads < 1) fail("threads must be >= 1");
  if (!(clutter.volume > 0.0) || !std::isfinite(clutter.volume)) fail("clutter.volume must be positive");

  const TargetModel model = build_model(this->model);
  const auto d = model.dim();
  if (targets.empty() || targets.size() > 2) fail("one or two targets are supported");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string where = "targets[" + std::to_string(i) + "]";
    const TargetSpec& t = targets[i];
    if (t.prior_mean.size() != d) fail(where + ".prior_mean must have " + std::to_string(d) + " entries");
    if (t.prior_cov.rows() != d || t.prior_cov.cols() != d) fail(where + ".prior_cov has the wrong shape");
    if (!is_psd(t.prior_cov)) fail(where + ".prior_cov must be symmetric positive semidefinite");
    if (t.initial && t.initial->size() != d) fail(where + ".initial must have " + std::to_string(d) + " entries");
  }

  if (two_target()) {
    if (channels != 2) fail("the two-target scenario uses exactly 2 channels");
    if (initial_association && (*initial_association < 1 || *initial_association > 2)) {
      fail("initial_association must be 1 or 2 for two targets");
    }
    if (!initial_belief.empty() && initial_belief.size() != 2) fail("initial_belief must have 2 entries (pi)");
    if (clutter.model != ClutterModel::kNoise) fail("clutter points are only defined for one target");
    if (always_detected) fail("always_detected applies to one target");
  } else {
    if (channels < 1) fail("channels must be >= 1");
    if (initial_association && (*initial_association < 0 || *initial_association > channels)) {
      fail("initial_association must lie in 0..channels");
    }
    if (always_detected && initial_association && *initial_association == 0) {
      fail("initial_association 0 contradicts always_detected");
    }
    if (!initial_belief.empty() && initial_belief.size() != static_cast<std::size_t>(channels) + 1) {
      fail("initial_belief must have channels + 1 entries");
    }
  }
  if (!initial_belief.empty()) {
    double total = 0.0;
    for (double b : initial_belief) {
      if (!(b >= 0.0 && b <= 1.0)) fail("initial_belief entries must lie in [0, 1]");
      total += b;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("initial_belief must sum to 1");
  }
  if (gain == GainMode::kIntegral1d && d != 1) fail("gain integral-1d requires a scalar state");
  if (gain == GainMode::kLinear && !model.linear) fail("gain linear requires linear drift and observation maps");
  if (oracles.kalman && !model.linear) fail("the kalman oracle requires a linear model");
  if (oracles.grid && d != 1) fail("the grid oracle requires a scalar state");
  if (oracles.bayes && association == AssociationMode::kBayes) fail("the bayes oracle duplicates assoc-mode bayes");
}

ScenarioConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed to read config file " + path.string());
  return parse_config(buffer.str());
}

std::string config_to_json(const ScenarioConfig& c) {
  json model{{"drift", c.model.drift},
             {"diffusion", to_json(c.model.diffusion)},
             {"observation", c.model.observation},
             {"obs_noise", c.model.obs_noise}};
  if (c.model.drift_matrix.size() > 0) model["drift_matrix"] = to_json(c.model.drift_matrix);
  if (c.model.observation_row.size() > 0) model["observation_row"] = to_json(Vector(c.model.observation_row.transpose()));

  json targets = json::array();
  for (const TargetSpec& t : c.targets) {
    json entry{{"prior_mean", to_json(t.prior_mean)}, {"prior_cov", to_json(t.prior_cov)}};
    entry["initial"] = t.initial ? to_json(*t.initial) : json(nullptr);
    targets.push_back(entry);
  }

  json j{{"name", c.name},
         {"kind", to_string(c.kind)},
         {"model", model},
         {"targets", targets},
         {"channels", c.channels},
         {"rate", c.rate},
         {"clutter", {{"model", to_string(c.clutter.model)}, {"volume", c.clutter.volume}, {"center", c.clutter.center}}},
         {"dt", c.dt},
         {"horizon", c.horizon},
         {"particles", c.particles},
         {"seed", c.seed},
         {"association", to_string(c.association)},
         {"gain", to_string(c.gain)},
         {"gain_stride", c.gain_stride},
         {"bandwidth", c.bandwidth},
         {"initial_association", c.initial_association ? json(*c.initial_association) : json(nullptr)},
         {"always_detected", c.always_detected},
         {"initial_belief", c.initial_belief},
         {"oracles",
          {{"kalman", c.oracles.kalman}, {"grid", c.oracles.grid}, {"wonham", c.oracles.wonham}, {"bayes", c.oracles.bayes}}},
         {"grid_cells", c.grid_cells},
         {"threads", c.threads}};
  return j.dump(2) + "\n";
}

}  // namespace pdafpf
