#include "flockhydro/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "flockhydro/checkpoint.hpp"
#include "flockhydro/errors.hpp"

namespace flockhydro {

namespace {

// Potential fields are kept apart until the whole file is read, since alpha
// and beta may appear before `potential`.
struct Draft {
  RunConfig cfg;
  std::string potential = "zero";
  double alpha = 1.0;
  double beta = 1.0;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key, "expected a number, got '" + v + "'");
  if (!std::isfinite(x)) throw ConfigError(key, "value must be finite");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return x;
}

int to_small_int(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < -1000000000LL || x > 1000000000LL) throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

std::string list_text(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + format_double(xs[k]);
  return s;
}

struct Entry {
  std::string section;
  std::function<void(Draft&, const std::string& path, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Entry number(const std::string& section, T RunConfig::*field) {
  Entry e;
  e.section = section;
  e.set = [field](Draft& d, const std::string& path, const std::string& v) {
    if constexpr (std::is_same_v<T, double>) d.cfg.*field = to_double(path, v);
    else if constexpr (std::is_same_v<T, int>) d.cfg.*field = to_small_int(path, v);
    else if constexpr (std::is_same_v<T, bool>) d.cfg.*field = to_bool(path, v);
    else if constexpr (std::is_same_v<T, std::string>) d.cfg.*field = v;
    else if constexpr (std::is_same_v<T, std::vector<double>>) d.cfg.*field = to_list(path, v);
  };
  e.get = [field](const RunConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, double>) return format_double(c.*field);
    else if constexpr (std::is_same_v<T, int>) return std::to_string(c.*field);
    else if constexpr (std::is_same_v<T, bool>) return c.*field ? "true" : "false";
    else if constexpr (std::is_same_v<T, std::string>) return c.*field;
    else return list_text(c.*field);
  };
  return e;
}

const std::map<std::string, Entry>& entries() {
  static const std::map<std::string, Entry> table = [] {
    std::map<std::string, Entry> t;
    t["command"] = number("", &RunConfig::command);
    t["output_dir"] = number("", &RunConfig::output_dir);
    t["seed"] = {"",
                 [](Draft& d, const std::string& p, const std::string& v) {
                   const long long s = to_int(p, v);
                   if (s < 0) throw ConfigError(p, "seed must be nonnegative");
                   d.cfg.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};

    t["sigma"] = {"model", [](Draft& d, const std::string& p, const std::string& v) { d.cfg.model.sigma = to_double(p, v); },
                  [](const RunConfig& c) { return format_double(c.model.sigma); }};
    t["d"] = {"model", [](Draft& d, const std::string& p, const std::string& v) { d.cfg.model.dim = to_small_int(p, v); },
              [](const RunConfig& c) { return std::to_string(c.model.dim); }};
    t["eta"] = {"model", [](Draft& d, const std::string& p, const std::string& v) { d.cfg.model.eta = to_double(p, v); },
                [](const RunConfig& c) { return format_double(c.model.eta); }};
    t["potential"] = {"model", [](Draft& d, const std::string&, const std::string& v) { d.potential = v; },
                      [](const RunConfig& c) -> std::string {
                        if (std::holds_alternative<SelfPropulsion>(c.model.potential)) return "self_propulsion";
                        if (std::holds_alternative<TabulatedRadial>(c.model.potential)) return "tabulated";
                        return "zero";
                      }};
    t["alpha"] = {"model", [](Draft& d, const std::string& p, const std::string& v) { d.alpha = to_double(p, v); },
                  [](const RunConfig& c) {
                    const auto* sp = std::get_if<SelfPropulsion>(&c.model.potential);
                    return sp ? format_double(sp->alpha) : std::string("-");
                  }};
    t["beta"] = {"model", [](Draft& d, const std::string& p, const std::string& v) { d.beta = to_double(p, v); },
                 [](const RunConfig& c) {
                   const auto* sp = std::get_if<SelfPropulsion>(&c.model.potential);
                   return sp ? format_double(sp->beta) : std::string("-");
                 }};
    t["potential_file"] = number("model", &RunConfig::potential_file);

    t["n_quad"] = number("grid", &RunConfig::n_quad);
    t["n_chi"] = number("grid", &RunConfig::n_chi);
    t["chi_tol"] = number("grid", &RunConfig::chi_tol);
    t["truncation_tol"] = number("grid", &RunConfig::truncation_tol);
    t["lambdas"] = number("grid", &RunConfig::lambdas);

    t["t_end"] = number("run", &RunConfig::t_end);
    t["output_every"] = number("run", &RunConfig::output_every);
    t["cfl"] = number("run", &RunConfig::cfl);
    t["flux"] = number("run", &RunConfig::flux);

    t["nx"] = number("space", &RunConfig::nx);
    t["ny"] = number("space", &RunConfig::ny);
    t["lx"] = number("space", &RunConfig::lx);
    t["ly"] = number("space", &RunConfig::ly);
    t["profile"] = number("space", &RunConfig::profile);
    t["rho_mean"] = number("space", &RunConfig::rho_mean);
    t["rho_amp"] = number("space", &RunConfig::rho_amp);
    t["phi_amp"] = number("space", &RunConfig::phi_amp);

    t["particles"] = number("particles", &RunConfig::particles);
    t["epsilon"] = number("particles", &RunConfig::epsilon);
    t["dt_over_epsilon"] = number("particles", &RunConfig::dt_over_epsilon);
    t["n_bins"] = number("particles", &RunConfig::n_bins);
    t["homogeneous"] = number("particles", &RunConfig::homogeneous);
    t["epsilons"] = number("particles", &RunConfig::epsilons);
    t["bootstrap"] = number("particles", &RunConfig::bootstrap);
    t["soh_refinement"] = number("particles", &RunConfig::soh_refinement);

    t["n_test"] = number("verify", &RunConfig::n_test);
    t["n_densities"] = number("verify", &RunConfig::n_densities);
    t["n_negative"] = number("verify", &RunConfig::n_negative);
    return t;
  }();
  return table;
}

std::string path_of(const std::string& key) {
  const Entry& e = entries().at(key);
  return e.section.empty() ? key : e.section + "." + key;
}

// Resolves `key` written inside `section` (or given as a flag when section is
// null) to a table key.
std::string resolve(const std::string& raw, const std::string* section) {
  std::string key = raw, sec;
  if (const auto dot = raw.find('.'); dot != std::string::npos) {
    sec = raw.substr(0, dot);
    key = raw.substr(dot + 1);
  } else if (section) {
    sec = *section;
  }
  const auto it = entries().find(key);
  if (it == entries().end()) throw ConfigError(raw, "unknown key '" + raw + "'");
  const bool explicit_section = raw.find('.') != std::string::npos || (section && !section->empty());
  if (explicit_section && sec != it->second.section) {
    const std::string where = it->second.section.empty() ? "top level" : "[" + it->second.section + "]";
    throw ConfigError(raw, "unknown key '" + raw + "' (" + key + " belongs to " + where + ")");
  }
  return key;
}

TabulatedRadial load_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("model.potential_file", "cannot open '" + path + "'");
  std::vector<double> r, v;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("model.potential_file", "line " + std::to_string(lineno) + ": expected 'r,V'");
    r.push_back(to_double("model.potential_file", trim(line.substr(0, comma))));
    v.push_back(to_double("model.potential_file", trim(line.substr(comma + 1))));
  }
  try {
    return TabulatedRadial(r, v);
  } catch (const DomainError& e) {
    throw ConfigError("model.potential_file", e.what());
  }
}

RunConfig finish(Draft d, const std::string& base_dir) {
  RunConfig& c = d.cfg;
  if (d.potential == "zero") {
    c.model.potential = ZeroPotential{};
  } else if (d.potential == "self_propulsion") {
    c.model.potential = SelfPropulsion{d.alpha, d.beta};
  } else if (d.potential == "tabulated") {
    if (c.potential_file.empty()) throw ConfigError("model.potential_file", "required for potential = tabulated");
    std::filesystem::path p(c.potential_file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.model.potential = load_table(p.string());
  } else {
    throw ConfigError("model.potential", "expected zero, self_propulsion or tabulated, got '" + d.potential + "'");
  }
  validate_config(c);
  return c;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void validate_config(const RunConfig& c) {
  static const std::vector<std::string> commands{"coeffs", "chi", "hydro", "kinetic", "verify", "compare"};
  if (c.command.empty()) throw ConfigError("command", "missing command");
  if (std::find(commands.begin(), commands.end(), c.command) == commands.end())
    throw ConfigError("command", "expected one of coeffs, chi, hydro, kinetic, verify, compare, got '" + c.command + "'");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  try {
    c.model.validate();
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    const std::string reason = msg.substr(msg.find(": ") + 2);
    const std::string key = reason.substr(0, reason.find(' '));
    throw ConfigError(key == "dim" ? "model.d" : "model." + key, reason);
  }
  auto require = [](bool ok, const std::string& key, const std::string& reason) {
    if (!ok) throw ConfigError(path_of(key), reason);
  };
  require(c.n_quad >= 4 && c.n_quad <= 4096, "n_quad", "n_quad must lie in [4, 4096]");
  require(c.n_chi >= 4 && c.n_chi <= 4096, "n_chi", "n_chi must lie in [4, 4096]");
  require(c.chi_tol > 0.0 && c.chi_tol <= 1e-4, "chi_tol", "chi_tol must lie in (0, 1e-4]");
  require(c.truncation_tol > 0.0 && c.truncation_tol < 1e-3, "truncation_tol", "truncation_tol must lie in (0, 1e-3)");
  for (std::size_t k = 0; k < c.lambdas.size(); ++k)
    require(c.lambdas[k] > 0.0 && (k == 0 || c.lambdas[k] > c.lambdas[k - 1]), "lambdas",
            "lambdas must be positive and increasing");
  require(c.t_end >= 0.0, "t_end", "t_end must be nonnegative");
  require(c.output_every >= 0.0, "output_every", "output_every must be nonnegative");
  require(c.output_every == 0.0 || c.t_end / c.output_every <= 100000, "output_every", "more than 1e5 snapshots");
  require(c.cfl > 0.0 && c.cfl <= 1.0, "cfl", "cfl must lie in (0, 1]");
  require(c.flux == "upwind" || c.flux == "rusanov", "flux", "expected upwind or rusanov");
  require(c.nx >= 3, "nx", "nx must be at least 3");
  require(c.ny == 0 || c.ny >= 3, "ny", "ny must be 0 (1D) or at least 3");
  require(c.ny == 0 || c.model.dim >= 2, "ny", "2D space needs d >= 2");
  require(c.lx > 0.0, "lx", "lx must be positive");
  require(c.ly > 0.0, "ly", "ly must be positive");
  require(c.profile == "wave" || c.profile == "constant" || c.profile == "bump", "profile",
          "expected wave, constant or bump");
  require(c.rho_mean >= 0.0, "rho_mean", "rho_mean must be nonnegative");
  require(c.rho_mean + c.rho_amp > 0.0, "rho_amp", "the density vanishes identically");
  require(c.rho_amp >= 0.0, "rho_amp", "rho_amp must be nonnegative");
  require(c.profile != "wave" || c.rho_amp <= c.rho_mean, "rho_amp", "rho_amp must not exceed rho_mean");
  require(std::abs(c.phi_amp) < std::numbers::pi, "phi_amp", "|phi_amp| must be below pi");
  require(c.particles >= 1, "particles", "particles must be at least 1");
  require(c.epsilon > 0.0, "epsilon", "epsilon must be positive");
  require(c.dt_over_epsilon > 0.0 && c.dt_over_epsilon <= 0.1, "dt_over_epsilon",
          "dt_over_epsilon must lie in (0, 0.1]");
  require(c.n_bins >= 3, "n_bins", "n_bins must be at least 3");
  require(!c.epsilons.empty(), "epsilons", "epsilons must not be empty");
  for (double e : c.epsilons) require(e > 0.0, "epsilons", "epsilons must be positive");
  require(c.bootstrap >= 0 && c.bootstrap != 1, "bootstrap", "bootstrap must be 0 or at least 2");
  require(c.soh_refinement >= 1, "soh_refinement", "soh_refinement must be at least 1");
  require(c.n_test >= 1, "n_test", "n_test must be at least 1");
  require(c.n_densities >= 1, "n_densities", "n_densities must be at least 1");
  require(c.n_negative >= 0, "n_negative", "n_negative must be nonnegative");
  if (c.command == "kinetic" && !c.homogeneous)
    require(c.ny == 0, "ny", "the particle simulation is 1D in space");
}

RunConfig parse_config_text(const std::string& text, const Overrides& overrides, const std::string& base_dir) {
  Draft d;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      static const std::vector<std::string> sections{"model", "grid", "run", "space", "particles", "verify"};
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError("[" + section + "]", "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string raw = trim(line.substr(0, eq));
    const std::string key = resolve(raw, &section);
    entries().at(key).set(d, path_of(key), trim(line.substr(eq + 1)));
  }
  for (const auto& [raw, value] : overrides) {
    const std::string key = resolve(raw, nullptr);
    entries().at(key).set(d, path_of(key), trim(value));
  }
  return finish(std::move(d), base_dir);
}

RunConfig parse_config(const std::string& path, const Overrides& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), overrides, std::filesystem::path(path).parent_path().string());
}

std::string canonical_text(const RunConfig& c) {
  std::vector<std::string> lines;
  for (const auto& [key, e] : entries())
    if (key != "output_dir") lines.push_back(path_of(key) + " = " + e.get(c));
  if (const auto* tab = std::get_if<TabulatedRadial>(&c.model.potential)) {
    // the table itself, not its file name, defines the model
    lines.push_back("model.table = " + list_text(tab->nodes()) + ";" + list_text(tab->values()));
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::uint64_t config_digest(const RunConfig& c) { return fnv1a64(canonical_text(c)); }

}  // namespace flockhydro
