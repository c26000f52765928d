#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rpchain/cones.hpp"
#include "rpchain/fock.hpp"
#include "rpchain/irbound.hpp"
#include "rpchain/model.hpp"
#include "rpchain/observables.hpp"
#include "rpchain/operators.hpp"
#include "rpchain/paths.hpp"
#include "rpchain/spectral.hpp"
#include "rpchain/suites.hpp"
#include "rpchain/transforms.hpp"

namespace rpchain::cli {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything a command needs besides the command name.
struct RunConfig {
  ModelParams model;
  std::uint64_t seed = 42;
  std::vector<double> betas{1.0};
  int samples = 200;                            // cone generators per test
  int fields = 20;                              // random fields per inequality
  double cone_tol = 1e-8;                       // reflection-cone margin, relative to the largest sector eigenvalue
  EigenMethod method = EigenMethod::automatic;
  int string_order = 3;                         // largest m for CDW strings
  std::vector<double> taus{1e-2, 5e-3, 2.5e-3}; // path amplitude step sizes
  std::vector<double> epsilons{0.5};            // free evolution between composed paths
};

// ---------------------------------------------------------------------------
// Config parsing: "key = value" lines, '#' comments

namespace detail {

inline std::string trim(const std::string& s)
{
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline double parse_double(const std::string& s)
{
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) throw std::invalid_argument("not a number");
  return v;
}

inline long long parse_int(const std::string& s)
{
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("not an integer");
  return v;
}

inline std::vector<double> parse_list(const std::string& s)
{
  std::vector<double> out;
  for (const std::string& x : split(s, ',')) out.push_back(parse_double(x));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline const std::vector<std::string>& known_keys()
{
  static const std::vector<std::string> keys = {
      "model.ell",        "model.t",          "model.g",           "model.omega",       "interaction.kind",
      "interaction.U",    "interaction.alpha", "interaction.amplitude", "interaction.table", "phonon.n_max",
      "phonon.grid_nodes", "tol.psd",         "tol.strict",        "tol.gap",           "tol.cone",
      "run.seed",         "run.beta",         "run.samples",       "run.fields",        "run.method",
      "run.string_order", "run.taus",         "run.epsilons"};
  return keys;
}

} // namespace detail

/// Parses the flat dotted-key format. Unknown or repeated keys, bad values and
/// invariant violations raise ConfigError with the line number or key.
inline RunConfig parse_config(std::istream& in, const std::string& source = "config")
{
  std::map<std::string, std::pair<std::string, int>> raw; // key -> (value, line)
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    const auto& keys = detail::known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (raw.count(key)) throw ConfigError(where + ": key '" + key + "' repeated (first on line " +
                                          std::to_string(raw[key].second) + ")");
    if (value.empty()) throw ConfigError(where + ": key '" + key + "' has no value");
    raw[key] = {value, lineno};
  }

  RunConfig cfg;
  ModelParams& m = cfg.model;
  auto with = [&](const std::string& key, auto&& apply) {
    auto it = raw.find(key);
    if (it == raw.end()) return;
    try {
      apply(it->second.first);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(source + ":" + std::to_string(it->second.second) + ": key '" + key + "': " + e.what() +
                        " ('" + it->second.first + "')");
    }
  };
  with("model.ell", [&](const std::string& v) { m.ell = static_cast<int>(detail::parse_int(v)); });
  with("model.t", [&](const std::string& v) { m.t = detail::parse_double(v); });
  with("model.g", [&](const std::string& v) { m.g = detail::parse_double(v); });
  with("model.omega", [&](const std::string& v) { m.omega = detail::parse_double(v); });
  with("phonon.n_max", [&](const std::string& v) { m.n_max = static_cast<int>(detail::parse_int(v)); });
  with("phonon.grid_nodes", [&](const std::string& v) { m.grid_nodes = static_cast<int>(detail::parse_int(v)); });
  with("tol.psd", [&](const std::string& v) { m.tol_psd = detail::parse_double(v); });
  with("tol.strict", [&](const std::string& v) { m.tol_strict = detail::parse_double(v); });
  with("tol.gap", [&](const std::string& v) { m.gap_tol = detail::parse_double(v); });
  with("tol.cone", [&](const std::string& v) { cfg.cone_tol = detail::parse_double(v); });
  with("run.seed", [&](const std::string& v) {
    const long long s = detail::parse_int(v);
    if (s < 0) throw std::invalid_argument("seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  });
  with("run.beta", [&](const std::string& v) {
    cfg.betas = detail::parse_list(v);
    for (double b : cfg.betas)
      if (!(b > 0.0)) throw std::invalid_argument("beta must be > 0");
  });
  with("run.samples", [&](const std::string& v) {
    cfg.samples = static_cast<int>(detail::parse_int(v));
    if (cfg.samples < 1) throw std::invalid_argument("samples must be >= 1");
  });
  with("run.fields", [&](const std::string& v) {
    cfg.fields = static_cast<int>(detail::parse_int(v));
    if (cfg.fields < 0) throw std::invalid_argument("fields must be >= 0");
  });
  with("run.method", [&](const std::string& v) {
    if (v == "auto") cfg.method = EigenMethod::automatic;
    else if (v == "dense") cfg.method = EigenMethod::dense;
    else if (v == "lanczos") cfg.method = EigenMethod::lanczos;
    else throw std::invalid_argument("expected auto, dense or lanczos");
  });
  with("run.string_order", [&](const std::string& v) {
    cfg.string_order = static_cast<int>(detail::parse_int(v));
    if (cfg.string_order < 0) throw std::invalid_argument("string order must be >= 0");
  });
  with("run.taus", [&](const std::string& v) {
    cfg.taus = detail::parse_list(v);
    if (cfg.taus.size() < 2) throw std::invalid_argument("at least two step sizes are needed for a slope");
    for (double t : cfg.taus)
      if (!(t > 0.0)) throw std::invalid_argument("step sizes must be > 0");
  });
  with("run.epsilons", [&](const std::string& v) {
    cfg.epsilons = detail::parse_list(v);
    for (double e : cfg.epsilons)
      if (!(e >= 0.0)) throw std::invalid_argument("epsilons must be >= 0");
  });

  std::string kind = "none";
  with("interaction.kind", [&](const std::string& v) { kind = v; });
  auto require_kind = [&](const std::string& key, const std::string& k) {
    if (raw.count(key) && kind != k)
      throw ConfigError(source + ":" + std::to_string(raw[key].second) + ": key '" + key +
                        "' requires interaction.kind=" + k);
  };
  require_kind("interaction.U", "nearest");
  require_kind("interaction.alpha", "power_law");
  require_kind("interaction.amplitude", "power_law");
  require_kind("interaction.table", "table");
  const auto kind_line = raw.count("interaction.kind") ? std::to_string(raw["interaction.kind"].second) : "-";
  if (kind == "none") {
    m.interaction = InteractionSpec::none_kind();
  } else if (kind == "nearest") {
    double U = 0.0;
    with("interaction.U", [&](const std::string& v) { U = detail::parse_double(v); });
    if (!raw.count("interaction.U")) throw ConfigError(source + ":" + kind_line + ": nearest needs interaction.U");
    try {
      m.interaction = InteractionSpec::nearest(U);
    } catch (const std::exception& e) {
      throw ConfigError(source + ":" + std::to_string(raw["interaction.U"].second) + ": " + e.what());
    }
  } else if (kind == "power_law") {
    double alpha = 1.0, amp = 1.0;
    with("interaction.alpha", [&](const std::string& v) { alpha = detail::parse_double(v); });
    with("interaction.amplitude", [&](const std::string& v) { amp = detail::parse_double(v); });
    if (!raw.count("interaction.alpha")) throw ConfigError(source + ":" + kind_line + ": power_law needs interaction.alpha");
    try {
      m.interaction = InteractionSpec::power_law(alpha, amp);
    } catch (const std::exception& e) {
      throw ConfigError(source + ":" + kind_line + ": " + e.what());
    }
  } else if (kind == "table") {
    std::map<long, double> values;
    with("interaction.table", [&](const std::string& v) {
      for (const std::string& item : detail::split(v, ',')) {
        const auto c = item.find(':');
        if (c == std::string::npos) throw std::invalid_argument("expected j:value pairs");
        values[static_cast<long>(detail::parse_int(detail::trim(item.substr(0, c))))] =
            detail::parse_double(detail::trim(item.substr(c + 1)));
      }
      m.interaction = InteractionSpec::from_table(values);
    });
    if (!raw.count("interaction.table")) throw ConfigError(source + ":" + kind_line + ": table needs interaction.table");
  } else {
    throw ConfigError(source + ":" + kind_line + ": key 'interaction.kind': expected none, nearest, power_law or table");
  }

  try {
    m.validate();
  } catch (const std::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

inline json interaction_json(const InteractionSpec& s)
{
  json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case InteractionKind::none: break;
    case InteractionKind::nearest: j["U"] = s.strength; break;
    case InteractionKind::power_law:
      j["alpha"] = s.alpha;
      j["amplitude"] = s.amplitude;
      break;
    case InteractionKind::table: {
      json t = json::object();
      for (const auto& [k, v] : s.table) t[std::to_string(k)] = v;
      j["table"] = t;
      break;
    }
  }
  return j;
}

inline std::string method_name(EigenMethod m)
{
  return m == EigenMethod::dense ? "dense" : (m == EigenMethod::lanczos ? "lanczos" : "auto");
}

/// The fully resolved configuration, defaults included.
inline json config_json(const RunConfig& c)
{
  const ModelParams& m = c.model;
  json j;
  j["model"] = {{"ell", m.ell}, {"t", m.t}, {"g", m.g}, {"omega", m.omega}};
  j["interaction"] = interaction_json(m.interaction);
  j["phonon"] = {{"n_max", m.n_max}, {"grid_nodes", m.grid_nodes}};
  j["tol"] = {{"psd", m.tol_psd}, {"strict", m.tol_strict}, {"gap", m.gap_tol}, {"cone", c.cone_tol}};
  j["run"] = {{"seed", c.seed},         {"beta", c.betas},          {"samples", c.samples},
              {"fields", c.fields},     {"method", method_name(c.method)}, {"string_order", c.string_order},
              {"taus", c.taus},         {"epsilons", c.epsilons}};
  return j;
}

// ---------------------------------------------------------------------------
// Execution context

struct RunOptions {
  int threads = 1;
  std::string csv_dir;                              // empty: no CSV side files
  std::function<void(const std::string&)> log;      // progress messages, may be empty
};

/// Runs f(0..n−1) on up to `threads` workers; the first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f)
{
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct CommandResult {
  json result;
  bool pass = true;
};

namespace detail {

inline void note(const RunOptions& o, const std::string& msg)
{
  if (o.log) o.log(msg);
}

inline json verdict_json(const ConeVerdict& v)
{
  json j;
  j["member"] = v.member;
  j["strict"] = v.strict;
  j["worst_margin"] = v.worst_margin;
  j["witness"] = v.witness;
  j["tol"] = v.tol;
  j["tol_strict"] = v.tol_strict;
  j["hermiticity_residual"] = v.hermiticity_residual;
  j["imag_residual"] = v.imag_residual;
  j["sampled"] = v.sampled;
  j["samples"] = v.samples;
  j["seed"] = v.seed;
  if (!v.diagnostic.empty()) j["diagnostic"] = v.diagnostic;
  return j;
}

inline json sites_json(std::uint32_t mask, int first, int n)
{
  json a = json::array();
  for (int p = 0; p < n; ++p)
    if (bit_at(mask, n, p)) a.push_back(first + p);
  return a;
}

inline std::vector<double> plane_wave_real(int n, int ell, double p)
{
  std::vector<double> h(n);
  for (int k = 0; k < n; ++k) h[k] = std::cos(p * (k - ell));
  return h;
}

inline FieldVector plane_wave(int n, int ell, double p)
{
  FieldVector h(n);
  for (int k = 0; k < n; ++k) h[k] = std::exp(cplx(0.0, p * (k - ell)));
  return h;
}

inline std::ofstream open_csv(const RunOptions& o, const std::string& name)
{
  std::filesystem::create_directories(o.csv_dir);
  std::ofstream f(std::filesystem::path(o.csv_dir) / name);
  if (!f) throw std::runtime_error("cannot write CSV file " + name);
  f << std::setprecision(17);
  return f;
}

inline void require_odd(const RunConfig& c, const std::string& command)
{
  if (c.model.ell % 2 == 0)
    throw ConfigError(command + " requires an odd model.ell, got " + std::to_string(c.model.ell));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline CommandResult cmd_spectrum(const RunConfig& c, const RunOptions& o)
{
  const ModelParams& m = c.model;
  const CompositeBasis half = half_filled_basis(m.ell, PhononBasisSpec::fock(m.n_max, m.omega));
  detail::note(o, "spectrum: dimension " + std::to_string(half.dim()));
  const SpMat H = build_hamiltonian(m, half).mat;
  CommandResult r;
  json& j = r.result;
  j["dim"] = half.dim();
  const double scale = std::max(1.0, norm_bound(H));
  const bool dense = c.method == EigenMethod::dense || (c.method == EigenMethod::automatic && half.dim() <= 4000);
  if (dense) {
    const HermitianEigen es = dense_eigh(MatC(H));
    const Index k = std::min<Index>(20, es.values.size());
    j["method"] = "dense";
    j["E0"] = es.values(0);
    j["gap"] = es.values.size() > 1 ? es.values(1) - es.values(0) : 0.0;
    j["lowest"] = std::vector<double>(es.values.data(), es.values.data() + k);
    const VecC psi = es.vectors.col(0);
    const double res = (H * psi - es.values(0) * psi).norm();
    j["residual"] = res;
    r.pass = res <= 1e-8 * scale;
  } else {
    const EigenResult g = ground_state(H, EigenMethod::lanczos);
    j["method"] = g.method;
    j["E0"] = g.E0;
    j["gap"] = g.gap;
    j["residual"] = g.residual;
    j["iterations"] = g.iterations;
    j["converged"] = g.converged;
    r.pass = g.converged && g.residual <= 1e-8 * scale;
  }
  j["polaron_shift"] = m.g * m.g * m.sites() / (4.0 * m.omega);
  return r;
}

inline CommandResult cmd_check_conditions(const RunConfig& c, const RunOptions&)
{
  const ModelParams& m = c.model;
  const ConditionB b1 = check_condition_B(m.interaction, m.ell, false, m.tol_psd, m.tol_strict);
  const ConditionB b2 = check_condition_B(m.interaction, m.ell, true, m.tol_psd, m.tol_strict);
  const ConditionC cc = check_condition_C(m.interaction);
  CommandResult r;
  json& j = r.result;
  json mat = json::array();
  for (Index a = 0; a < b1.matrix.rows(); ++a) {
    json row = json::array();
    for (Index b = 0; b < b1.matrix.cols(); ++b) row.push_back(b1.matrix(a, b));
    mat.push_back(row);
  }
  j["B"] = {{"matrix", mat}, {"min_eig", b1.min_eig}, {"B1_holds", b1.holds}, {"B2_holds", b2.holds}};
  j["C"] = {{"c1_sum", std::isfinite(cc.c1_sum) ? json(cc.c1_sum) : json("divergent")},
            {"C1_holds", cc.c1_holds},
            {"C2_holds", cc.c2_holds},
            {"C2_exponent", cc.c2_exponent},
            {"C2_value", cc.c2_value ? json(*cc.c2_value) : json("divergent")}};
  j["odd_ell"] = m.ell % 2 == 1;
  return r; // a report of which hypotheses hold; nothing to fail
}

inline CommandResult cmd_positivity_background(const RunConfig& c, const RunOptions& o)
{
  const ModelParams& m = c.model;
  const CompositeBasis b = half_filled_basis(m.ell, PhononBasisSpec::grid(m.grid_nodes, m.omega));
  if (b.dim() > 4000)
    throw ConfigError("positivity background: grid dimension " + std::to_string(b.dim()) +
                      " exceeds 4000; lower model.ell or phonon.grid_nodes");
  detail::note(o, "positivity background: dimension " + std::to_string(b.dim()));
  const SpMat Hs = build_hamiltonian(m, b).mat;
  const MatC Hc(Hs);
  const double imag = Hc.imag().cwiseAbs().maxCoeff();
  const MatR H = Hc.real();
  CommandResult r;
  json& j = r.result;
  j["dim"] = b.dim();
  j["imag_part"] = imag;
  json sg = json::array();
  for (double beta : c.betas) {
    const ConeVerdict v = matrix_nonnegative(nonnegative_expm(H, beta), 0.0);
    sg.push_back({{"beta", beta}, {"min_entry", v.worst_margin}, {"witness", v.witness}, {"strictly_positive", v.strict}});
    r.pass = r.pass && v.strict;
  }
  j["semigroup"] = sg;
  const HermitianEigen es = dense_eigh(Hc);
  const double scale = std::max(1.0, es.values.cwiseAbs().maxCoeff());
  const double gap = es.values.size() > 1 ? es.values(1) - es.values(0) : 0.0;
  const bool unique = gap > m.gap_tol * scale;
  const ConeVerdict gv = background_membership(es.vectors.col(0), b, m.tol_psd, m.tol_strict);
  j["ground"] = {{"E0", es.values(0)}, {"gap", gap}, {"unique", unique}, {"verdict", detail::verdict_json(gv)}};
  r.pass = r.pass && imag == 0.0 && unique && gv.strict;
  return r;
}

/// Strings on a vector of the half-filled H-picture basis, with the expectations under conditions B1/B2.
inline json strings_json(const std::vector<StringValue>& s, double floor, bool& all_nonneg, bool& all_strict,
                         double strict_tol)
{
  json a = json::array();
  all_nonneg = all_strict = true;
  for (const StringValue& v : s) {
    a.push_back({{"sites", v.sites}, {"value", v.value}});
    all_nonneg = all_nonneg && v.value >= floor;
    all_strict = all_strict && v.value > strict_tol;
  }
  return a;
}

inline CommandResult cmd_positivity_reflection(const RunConfig& c, const RunOptions& o)
{
  detail::require_odd(c, "positivity reflection");
  const ModelParams& m = c.model;
  const PhononBasisSpec ph = PhononBasisSpec::fock(m.n_max, m.omega);
  const VectorizationMap vm(m.ell, ph);
  const SpMat Ht = build_transformed(m, vm.balanced()).mat;
  detail::note(o, "positivity reflection: dimension " + std::to_string(Ht.rows()));
  const ConeModel cone = reflection_cone(vm, c.cone_tol, m.tol_strict);
  CommandResult r;
  json& j = r.result;
  j["dim"] = Ht.rows();
  json sg = json::array();
  for (std::size_t k = 0; k < c.betas.size(); ++k) {
    const double beta = c.betas[k];
    const MatVec S = [&Ht, beta](const VecC& v) { return krylov_expm(as_matvec(Ht), beta, v); };
    const ConeVerdict v = operator_preserves(S, cone, c.samples, c.seed + k);
    sg.push_back({{"beta", beta}, {"verdict", detail::verdict_json(v)}});
    r.pass = r.pass && v.member;
  }
  j["semigroup"] = sg;

  const EigenResult gt = ground_state(Ht, c.method);
  const ConeVerdict gv = reflection_membership_tilde(gt.psi, vm, c.cone_tol, m.tol_strict);
  j["ground_transformed"] = {{"E0", gt.E0}, {"gap", gt.gap}, {"verdict", detail::verdict_json(gv)}};
  r.pass = r.pass && gv.member;

  const CompositeBasis half = half_filled_basis(m.ell, ph);
  const EigenResult gh = ground_state(build_hamiltonian(m, half).mat, c.method);
  const ConeVerdict hv = reflection_membership(gh.psi, m, half, vm, ReflectionFrame::polaron, c.cone_tol, m.tol_strict);
  j["ground_polaron_frame"] = {{"E0", gh.E0}, {"gap", gh.gap}, {"verdict", detail::verdict_json(hv)}};

  const std::vector<StringValue> s = all_cdw_strings(gh.psi, half, c.string_order);
  bool nonneg = true, strict = true;
  j["strings"] = strings_json(s, -1e-10, nonneg, strict, m.tol_strict);
  const bool b2 = check_condition_B(m.interaction, m.ell, true, m.tol_psd, m.tol_strict).holds;
  j["strings_nonnegative"] = nonneg;
  j["strings_strict"] = strict;
  j["B2_holds"] = b2;
  r.pass = r.pass && nonneg && (!b2 || strict);
  return r;
}

inline CommandResult cmd_ergodicity(const RunConfig& c, const RunOptions& o)
{
  detail::require_odd(c, "ergodicity");
  const ModelParams& m = c.model;
  const PhononBasisSpec ph = PhononBasisSpec::fock(m.n_max, m.omega);
  const VectorizationMap vm(m.ell, ph);
  const SpMat Ht = build_transformed(m, vm.balanced()).mat;
  detail::note(o, "ergodicity: dimension " + std::to_string(Ht.rows()));
  const ConeModel cone = reflection_cone(vm, c.cone_tol, m.tol_strict);
  const Semigroup S = [&Ht](double beta, const VecC& v) { return krylov_expm(as_matvec(Ht), beta, v); };
  const ErgodicityReport er = ergodicity_check(S, cone, c.betas, c.samples, c.seed, m.tol_strict);
  CommandResult r;
  json& j = r.result;
  j["sampling"] = {{"ergodic", er.ergodic},       {"improving", er.improving}, {"min_overlap", er.min_overlap},
                   {"worst_pair", er.worst_pair}, {"pairs", er.pairs},         {"betas", er.betas},
                   {"seed", er.seed},             {"sampled", er.sampled}};

  detail::note(o, "ergodicity: composed path amplitudes");
  const PathContext ctx(m, ph);
  const std::vector<KeyAmplitude> ka = composed_amplitudes(ctx, c.taus, c.epsilons);
  double min_rel = std::numeric_limits<double>::infinity();
  json pairs = json::array();
  for (const KeyAmplitude& k : ka) {
    min_rel = std::min(min_rel, k.relative);
    pairs.push_back({{"x", detail::sites_json(k.x, -m.ell, m.sites())},
                     {"y", detail::sites_json(k.y, -m.ell, m.sites())},
                     {"relative", k.relative},
                     {"magnitude", k.magnitude},
                     {"tau", k.tau},
                     {"eps", k.eps}});
  }
  const bool paths_ok = min_rel > 1e-6;
  j["paths"] = {{"pairs", pairs.size()}, {"min_relative", min_rel}, {"all_nonzero", paths_ok}, {"amplitudes", pairs}};
  r.pass = er.ergodic && paths_ok;
  return r;
}

inline CommandResult cmd_transforms(const RunConfig& c, const RunOptions& o)
{
  const ModelParams& m = c.model;
  CommandResult r;
  json& j = r.result;
  detail::note(o, "transforms-test: algebra");
  const AlgebraReport a = algebra_suite(m);
  j["algebra"] = {{"car", a.car},
                  {"ccr_below_cutoff", a.ccr_below_cutoff},
                  {"ccr_top", a.ccr_top},
                  {"delta_n_square", a.delta_n_square},
                  {"number_commutator", a.number_commutator},
                  {"hermiticity", a.hermiticity},
                  {"constant_field", a.constant_field},
                  {"zero_field", a.zero_field},
                  {"max_defect", a.max_defect()}};
  detail::note(o, "transforms-test: hole-particle and reflection identities");
  const TransformReport t = transform_suite(m, c.seed);
  json tj = {{"hp_unitarity", t.hp_unitarity},
             {"hp_annihilator", t.hp_annihilator},
             {"hp_density", t.hp_density},
             {"hp_vacuum", t.hp_vacuum},
             {"hp_vacuum_sign", t.hp_vacuum_sign},
             {"stated_prefactor_matches", t.stated_prefactor_matches},
             {"reflection_checked", t.reflection_checked}};
  if (t.reflection_checked) {
    tj["theta_vacuum"] = t.theta_vacuum;
    tj["theta_b"] = t.theta_b;
    tj["theta_phonon"] = t.theta_phonon;
    tj["tau_density"] = t.tau_density;
    tj["tau_phonon"] = t.tau_phonon;
    tj["vectorization_isometry"] = t.vectorization_isometry;
    tj["vectorization_roundtrip"] = t.vectorization_roundtrip;
    tj["vacuum_sector_min_eig"] = t.vacuum_sector_psd;
    const DecompositionReport& d = t.decomposition;
    tj["decomposition"] = {{"hopping_reflection", d.hopping_reflection},
                           {"interaction_reflection", d.interaction_reflection},
                           {"seam_hopping", d.seam_hopping},
                           {"seam_interaction", d.seam_interaction},
                           {"phonon_reflection", d.phonon_reflection},
                           {"hamiltonian_split", d.hamiltonian_split}};
  }
  tj["max_defect"] = t.max_defect();
  j["transforms"] = tj;

  detail::note(o, "transforms-test: polaron transform at ell=1, n_max 2..8");
  ModelParams p1 = m;
  p1.ell = 1;
  const LangFirsovSequence lf = lang_firsov_sequence(p1, {2, 4, 6, 8});
  json seq = json::array();
  for (std::size_t k = 0; k < lf.reports.size(); ++k) {
    const LangFirsovReport& q = lf.reports[k];
    seq.push_back({{"n_max", lf.n_max[k]},
                   {"unitarity", q.unitarity_defect},
                   {"fermion_defect", q.fermion_defect},
                   {"boson_defect", q.boson_defect},
                   {"E0_shifted", q.ground_energy_h},
                   {"E0_polaron", q.ground_energy_polaron},
                   {"gap", q.spectral_gap}});
  }
  j["lang_firsov"] = {{"sequence", seq},
                      {"gap_monotone", lf.gap_monotone},
                      {"boson_defect_monotone", lf.boson_monotone},
                      {"final_gap", lf.final_gap}};
  bool lf_unitary = true;
  for (const LangFirsovReport& q : lf.reports) lf_unitary = lf_unitary && q.unitarity_defect <= 1e-12;
  r.pass = a.max_defect() <= 1e-12 && t.max_defect() <= 1e-10 && (m.ell % 2 == 0 || t.vacuum_sector_psd >= -1e-14) &&
           lf_unitary && lf.gap_monotone && lf.final_gap <= 1e-3;
  return r;
}

inline CommandResult cmd_paths(const RunConfig& c, const RunOptions& o)
{
  detail::require_odd(c, "paths");
  const ModelParams& m = c.model;
  const PhononBasisSpec ph = PhononBasisSpec::fock(m.n_max, m.omega);
  const PathContext ctx(m, ph);
  const auto configs = enumerate_half_filled(m.ell);
  CommandResult r;
  json items = json::array();
  std::vector<json> rows(configs.size());
  std::vector<char> ok(configs.size(), 0);
  detail::note(o, "paths: " + std::to_string(configs.size()) + " configurations");
  parallel_for(configs.size(), o.threads, [&](std::size_t i) {
    const std::uint32_t X = tilde_left(configs[i].mask, m.ell);
    const ConfigPath p = connect_to_vacuum(X, m.ell);
    const PathCheck chk = check_path(p);
    const SlopeFit f = leading_order_fit(ctx, p, c.taus);
    json cl = json::array();
    for (const auto& cluster : cluster_decompose(X, m.ell)) cl.push_back(cluster);
    json cfgs = json::array(), moves = json::array();
    for (std::uint32_t s : p.configs) cfgs.push_back(detail::sites_json(s, -m.ell, m.ell));
    for (const Move& mv : p.moves) moves.push_back({{"kind", to_string(mv.kind)}, {"site", mv.site}});
    rows[i] = {{"config", detail::sites_json(configs[i].mask, -m.ell, m.sites())},
               {"left", detail::sites_json(X, -m.ell, m.ell)},
               {"clusters", cl},
               {"valid", chk.valid},
               {"message", chk.message},
               {"configs", cfgs},
               {"moves", moves},
               {"length", p.length()},
               {"slope", f.slope},
               {"magnitudes", f.magnitudes},
               {"slope_matches", f.matches(0.1)}};
    ok[i] = chk.valid && f.matches(0.1);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    items.push_back(rows[i]);
    r.pass = r.pass && ok[i];
  }
  r.result["paths"] = items;
  r.result["taus"] = c.taus;

  detail::note(o, "paths: composed amplitudes");
  double min_rel = std::numeric_limits<double>::infinity();
  for (const KeyAmplitude& k : composed_amplitudes(ctx, c.taus, c.epsilons)) min_rel = std::min(min_rel, k.relative);
  r.result["composed"] = {{"min_relative", min_rel}, {"all_nonzero", min_rel > 1e-6}, {"epsilons", c.epsilons}};
  r.pass = r.pass && min_rel > 1e-6;

  const CompositeBasis bal = balanced_basis(m.ell, ph);
  if (bal.dim() <= 200) {
    detail::note(o, "paths: Dyson remainder");
    const DysonContext dc(m, ph);
    const ConeModel cone = reflection_cone(dc.vectorization(), c.cone_tol, m.tol_strict);
    json dy = json::array();
    for (double beta : c.betas) {
      const MatC E = DenseSemigroup(dc.transformed()).matrix(beta);
      const MatC D = dc.dyson_term(0, beta) + dc.dyson_term(1, beta) + dc.dyson_term(2, beta);
      const MatC Rem = E - std::exp(-beta * dc.reference_shift()) * D;
      const ConeVerdict v = operator_preserves([&Rem](const VecC& x) { return VecC(Rem * x); }, cone, c.samples, c.seed);
      dy.push_back({{"beta", beta}, {"w0", dc.w0()}, {"verdict", detail::verdict_json(v)}});
      r.pass = r.pass && v.member;
    }
    r.result["dyson_remainder"] = dy;
  }
  return r;
}

inline CommandResult cmd_correlations(const RunConfig& c, const RunOptions& o)
{
  const ModelParams& m = c.model;
  const PhononBasisSpec ph = PhononBasisSpec::fock(m.n_max, m.omega);
  const CompositeBasis half = half_filled_basis(m.ell, ph);
  detail::note(o, "correlations: dimension " + std::to_string(half.dim()));
  const EigenResult g = ground_state(build_hamiltonian(m, half).mat, c.method);
  CommandResult r;
  json& j = r.result;
  j["E0"] = g.E0;
  j["gap"] = g.gap;
  const int n = m.sites();
  double max_density = 0.0;
  for (int s = -m.ell; s < m.ell; ++s) max_density = std::max(max_density, std::abs(density(g.psi, half, s)));
  j["max_density"] = max_density;

  json corr = json::array();
  std::vector<std::vector<double>> C(n, std::vector<double>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      C[a][b] = correlator(g.psi, half, a - m.ell, b - m.ell);
      corr.push_back({{"i", a - m.ell}, {"j", b - m.ell}, {"corr", C[a][b]},
                      {"staggered", staggered_correlator(g.psi, half, a - m.ell, b - m.ell)}});
    }
  j["correlations"] = corr;
  const StructureFactor sf = structure_factor(g.psi, half);
  j["structure_factor"] = {{"momenta", sf.momenta}, {"values", sf.values}, {"G", sf.G},
                           {"parseval_defect", sf.parseval_defect}};
  const double sum_rule = std::abs(sf.G[m.ell] - 0.25);
  j["sum_rule_defect"] = sum_rule;

  // staggered correlations against the distance from site 0
  json stag = json::array();
  bool stag_pos = true, stag_monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int d = 1; d <= m.ell; ++d) {
    const int site = d < m.ell ? d : -m.ell; // distance ℓ wraps to −ℓ
    const double v = staggered_correlator(g.psi, half, site, 0);
    stag.push_back({{"distance", d}, {"value", v}});
    stag_pos = stag_pos && v > 0.0;
    stag_monotone = stag_monotone && v <= prev + 1e-12;
    prev = v;
  }
  j["staggered_by_distance"] = stag;
  j["staggered_positive"] = stag_pos;
  j["staggered_nonincreasing"] = stag_monotone; // observation only

  bool nonneg = true, strict = true;
  if (m.ell >= 1) j["strings"] = strings_json(all_cdw_strings(g.psi, half, c.string_order), -1e-10, nonneg, strict,
                                              m.tol_strict);
  j["strings_nonnegative"] = nonneg;
  j["strings_strict"] = strict;

  double covariance = 0.0;
  if (m.ell % 2 == 1) {
    // the same correlators in the transformed picture carry the factor (−1)^{i−j}
    const CompositeBasis bal = balanced_basis(m.ell, ph);
    const EigenResult gt = ground_state(build_transformed(m, bal).mat, c.method);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const double sg = ((a - b) % 2 == 0) ? 1.0 : -1.0;
        covariance = std::max(covariance, std::abs(sg * correlator(gt.psi, bal, a - m.ell, b - m.ell) - C[a][b]));
      }
    j["transformed_picture_defect"] = covariance; // shrinks with n_max, the polaron transform is exact only untruncated
  }

  if (!o.csv_dir.empty()) {
    std::ofstream f = detail::open_csv(o, "correlations.csv");
    f << "i,j,corr,staggered\n";
    for (const auto& e : corr) f << e["i"] << ',' << e["j"] << ',' << e["corr"].get<double>() << ','
                                 << e["staggered"].get<double>() << '\n';
  }
  const double scale = std::max(1.0, std::abs(g.E0));
  r.pass = g.residual <= 1e-8 * scale && sum_rule <= 1e-12 && sf.parseval_defect <= 1e-12 && max_density <= 1e-9;
  return r;
}

inline CommandResult cmd_inequalities(const RunConfig& c, const RunOptions& o, const std::string& mode)
{
  if (mode != "energy" && mode != "susceptibility" && mode != "infrared" && mode != "all")
    throw ConfigError("inequalities: unknown mode '" + mode + "' (energy, susceptibility, infrared)");
  const ModelParams& m = c.model;
  const PhononBasisSpec ph = PhononBasisSpec::fock(m.n_max, m.omega);
  const CompositeBasis bal = balanced_basis(m.ell, ph);
  const int n = m.sites();
  const InequalityOptions io{c.method, 1e-6};
  detail::note(o, "inequalities: dimension " + std::to_string(bal.dim()));
  const GroundData g = transformed_ground(m, bal, io);
  CommandResult r;
  json& j = r.result;
  j["E0"] = g.E0;
  j["gap"] = g.gap;
  j["degenerate"] = g.degenerate;
  j["sum_rule_defect"] = std::abs(correlator(g.psi, bal, 0, 0) - 0.25);
  if (g.degenerate) {
    j["diagnostic"] = "degenerate ground state; inequality tests aborted";
    r.pass = false;
    return r;
  }
  const double p0 = M_PI / m.ell;

  if (mode == "energy" || mode == "all") {
    std::vector<std::vector<double>> hs;
    hs.push_back(std::vector<double>(n, 0.7));
    hs.push_back(detail::plane_wave_real(n, m.ell, p0));
    for (int k = 0; k < c.fields; ++k) {
      const VecC z = random_vector(n, c.seed, 1000 + k);
      std::vector<double> h(n);
      for (int q = 0; q < n; ++q) h[q] = 0.5 * z(q).real();
      hs.push_back(h);
    }
    std::vector<MonotonicityResult> res(hs.size());
    parallel_for(hs.size(), o.threads, [&](std::size_t i) { res[i] = energy_monotonicity(m, hs[i], bal, g.E0, io); });
    json a = json::array();
    bool ok = true;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      a.push_back({{"h", hs[i]}, {"E0", res[i].E0}, {"Eh", res[i].Eh}, {"holds", res[i].holds}});
      ok = ok && res[i].holds;
    }
    j["energy"] = {{"cases", a}, {"all_hold", ok}};
    r.pass = r.pass && ok;
  }

  std::vector<FieldVector> fields;
  if (mode != "energy") {
    fields.push_back(detail::plane_wave(n, m.ell, p0));
    for (int k = 0; k < c.fields; ++k) {
      const VecC z = random_vector(n, c.seed, 2000 + k);
      fields.emplace_back(z.data(), z.data() + n);
    }
  }
  auto field_json = [](const FieldVector& h) {
    json a = json::array();
    for (const cplx& z : h) a.push_back({z.real(), z.imag()});
    return a;
  };
  if (mode == "susceptibility" || mode == "all") {
    std::vector<SusceptibilityResult> res(fields.size());
    parallel_for(fields.size(), o.threads, [&](std::size_t i) { res[i] = susceptibility_bound(m, fields[i], bal, g, io); });
    json a = json::array();
    bool ok = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const SusceptibilityResult& s = res[i];
      a.push_back({{"h", field_json(fields[i])},
                   {"lhs", s.lhs},
                   {"rhs", s.rhs},
                   {"lhs_real_part", s.lhs_real_part},
                   {"lhs_imag_part", s.lhs_imag_part},
                   {"cross_term", s.cross_term},
                   {"ground_residual", s.ground_residual},
                   {"reliable", s.reliable},
                   {"holds", s.holds}});
      ok = ok && s.holds && s.reliable;
    }
    j["susceptibility"] = {{"cases", a}, {"all_hold", ok}};
    r.pass = r.pass && ok;
  }
  if (mode == "infrared" || mode == "all") {
    std::vector<InfraredResult> res(fields.size());
    parallel_for(fields.size(), o.threads, [&](std::size_t i) { res[i] = infrared_bound(m, fields[i], bal, g, io); });
    json a = json::array();
    bool ok = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const InfraredResult& s = res[i];
      a.push_back({{"h", field_json(fields[i])},
                   {"lhs_sq", s.lhs_sq},
                   {"rhs", s.rhs},
                   {"ground_residual", s.ground_residual},
                   {"reliable", s.reliable},
                   {"holds", s.holds}});
      ok = ok && s.holds && s.reliable;
    }
    j["infrared"] = {{"cases", a}, {"all_hold", ok}};
    r.pass = r.pass && ok;
  }
  r.pass = r.pass && j["sum_rule_defect"].get<double>() <= 1e-12;
  return r;
}

inline CommandResult cmd_irbound(const RunConfig& c, const RunOptions& o)
{
  const ModelParams& m = c.model;
  const InteractionSpec& spec = m.interaction;
  detail::note(o, "irbound");
  CommandResult r;
  json& j = r.result;
  const C2Diagnostic d = c2_diagnostic(spec);
  j["c2"] = {{"holds", d.holds},
             {"exponent", d.exponent},
             {"divergence_rate", d.divergence_rate},
             {"value", d.value ? json(*d.value) : json("divergent")}};
  double min_rhat = std::numeric_limits<double>::infinity();
  const int grid = 10000;
  for (int k = 0; k <= grid; ++k) min_rhat = std::min(min_rhat, r_hat(spec, -M_PI + 2.0 * M_PI * k / grid));
  j["min_r_hat"] = min_rhat;
  r.pass = min_rhat >= -1e-12;
  if (d.holds) {
    const IRBoundResult s = sigma(spec, m.t);
    j["sigma"] = s.sigma ? json(*s.sigma) : json(nullptr);
    j["integral_value"] = s.integral_value ? json(*s.integral_value) : json(nullptr);
    j["quadrature_error_estimate"] = s.quadrature_error_estimate;
    j["diagnostics"] = {{"split_point", s.split_point},       {"fitted_exponent", s.fitted_exponent},
                        {"fitted_prefactor", s.fitted_prefactor}, {"endpoint_part", s.endpoint_part},
                        {"bulk_part", s.bulk_part},            {"bulk_error", s.bulk_error},
                        {"endpoint_error", s.endpoint_error},  {"series_terms", s.series_terms},
                        {"series_tail_bound", s.series_tail_bound}};
    const auto ts = t_star(spec);
    const auto tb = t_star_bisection(spec);
    j["t_star"] = ts ? json(*ts) : json(nullptr);
    j["t_star_bisection"] = tb ? json(*tb) : json(nullptr);
    const bool agree = ts && tb && std::abs(*ts - *tb) <= 1e-8 * std::max(1.0, std::abs(*ts));
    j["t_star_agree"] = agree;
    j["long_range_order_bound"] = s.sigma && *s.sigma > 0.0;
    r.pass = r.pass && s.sigma.has_value() && agree;
  } else {
    j["sigma"] = nullptr;
    j["diagnostic"] = "condition C2 fails: the sigma integral diverges at p = 0";
  }
  if (!o.csv_dir.empty()) {
    std::ofstream f = detail::open_csv(o, "irbound_integrand.csv");
    f << "p,r_hat,F,integrand\n";
    const int pts = 512;
    for (int k = 1; k <= pts; ++k) {
      const double p = M_PI * k / pts;
      const double R = r_hat(spec, p), F = f_of(m.t, p);
      f << p << ',' << R << ',' << F << ',' << (R > 0.0 ? std::sqrt(F / R) : std::numeric_limits<double>::infinity())
        << '\n';
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch and report assembly

inline const std::vector<std::string>& commands()
{
  static const std::vector<std::string> c = {"spectrum",    "check-conditions", "positivity", "ergodicity",
                                             "transforms-test", "paths",        "correlations", "inequalities",
                                             "irbound",     "all"};
  return c;
}

inline std::string utc_now()
{
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// One command; `mode` selects the variant for positivity and inequalities.
inline CommandResult run_single(const std::string& command, const std::string& mode, const RunConfig& c,
                                const RunOptions& o)
{
  if (command == "spectrum") return cmd_spectrum(c, o);
  if (command == "check-conditions") return cmd_check_conditions(c, o);
  if (command == "positivity") {
    if (mode == "background") return cmd_positivity_background(c, o);
    if (mode == "reflection") return cmd_positivity_reflection(c, o);
    throw ConfigError("positivity needs a mode: background or reflection");
  }
  if (command == "ergodicity") return cmd_ergodicity(c, o);
  if (command == "transforms-test") return cmd_transforms(c, o);
  if (command == "paths") return cmd_paths(c, o);
  if (command == "correlations") return cmd_correlations(c, o);
  if (command == "inequalities") return cmd_inequalities(c, o, mode.empty() ? "all" : mode);
  if (command == "irbound") return cmd_irbound(c, o);
  throw ConfigError("unknown command '" + command + "'");
}

/// The full report. Everything outside "timestamp" depends only on (config, seed).
inline json run(const std::string& command, const std::string& mode, const RunConfig& c, const RunOptions& o)
{
  json report;
  report["command"] = command;
  if (!mode.empty()) report["mode"] = mode;
  report["config"] = config_json(c);
  json timing = json::object();
  bool pass = true;
  if (command == "all") {
    struct Item {
      std::string name, mode, skip;
    };
    const ModelParams& m = c.model;
    const bool odd = m.ell % 2 == 1;
    const CompositeBasis gb = half_filled_basis(m.ell, PhononBasisSpec::grid(m.grid_nodes, m.omega));
    const std::vector<Item> items = {
        {"check-conditions", "", ""},
        {"spectrum", "", ""},
        {"transforms-test", "", ""},
        {"positivity", "background", gb.dim() > 4000 ? "grid dimension exceeds 4000" : ""},
        {"positivity", "reflection", odd ? "" : "even ell"},
        {"ergodicity", "", odd ? "" : "even ell"},
        {"paths", "", odd ? "" : "even ell"},
        {"correlations", "", ""},
        {"inequalities", "all", ""},
        {"irbound", "", ""}};
    json results = json::object();
    for (const Item& it : items) {
      const std::string key = it.mode.empty() || it.mode == "all" ? it.name : it.name + " " + it.mode;
      if (!it.skip.empty()) {
        results[key] = {{"skipped", it.skip}};
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const CommandResult cr = run_single(it.name, it.mode, c, o);
      timing[key] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      results[key] = {{"pass", cr.pass}, {"result", cr.result}};
      pass = pass && cr.pass;
    }
    report["pass"] = pass;
    report["result"] = results;
  } else {
    const auto t0 = std::chrono::steady_clock::now();
    const CommandResult cr = run_single(command, mode, c, o);
    timing[command] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report["pass"] = cr.pass;
    report["result"] = cr.result;
  }
  report["timestamp"] = {{"utc", utc_now()}, {"wall_seconds", timing}, {"threads", o.threads}};
  return report;
}

/// The report without its timestamp field, as compared across repeated runs.
inline std::string deterministic_dump(json report)
{
  report.erase("timestamp");
  return report.dump(2);
}

} // namespace rpchain::cli
