#pragma once

// Match job configuration: flat key=value files, overridable from the command line.

#include "pfm/eigensolver.hpp"
#include "pfm/energy.hpp"
#include "pfm/matrix_io.hpp"
#include "pfm/solver.hpp"

#include <map>

namespace pfm {

/// Every key accepted by JobConfig::set, in documentation order.
inline const std::vector<std::string>& job_config_keys() {
  static const std::vector<std::string> keys = {
      "part",        "full",           "out",         "descriptors_part", "descriptors_full", "shot_radius",
      "k",           "mu1",            "mu2",         "mu3",              "mu4_5",            "sigma_w",
      "sigma_xi",    "ms_smoothing",   "max_outer",   "cg_max_iter",      "cg_grad_tol",      "armijo",
      "backtrack",   "max_backtracks", "refine",      "refine_max",       "refine_tol",       "refine_energy_guard",
      "outer_tol",   "jobs"};
  return keys;
}

struct JobConfig {
  std::filesystem::path part;
  std::filesystem::path full;
  std::filesystem::path out = "out";
  std::filesystem::path descriptors_part; ///< optional precomputed n_N x q matrix
  std::filesystem::path descriptors_full; ///< optional precomputed n_M x q matrix
  double shot_radius = 0.0;               ///< 0: 7% of sqrt(area(M))
  EnergyParams energy;
  SolverOptions solver;
  int jobs = 1;

  /// Applies one key=value assignment; unknown keys are errors.
  void set(const std::string& key, const std::string& value) {
    auto as_bool = [&](const std::string& v) {
      if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
      if (v == "0" || v == "false" || v == "no" || v == "off") return false;
      throw InputError("config: '" + key + "' expects a boolean, got '" + v + "'");
    };
    auto as_int = [&](const std::string& v) { return static_cast<int>(parse_index(v)); };
    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"part", [&](const std::string& v) { part = v; }},
        {"full", [&](const std::string& v) { full = v; }},
        {"out", [&](const std::string& v) { out = v; }},
        {"descriptors_part", [&](const std::string& v) { descriptors_part = v; }},
        {"descriptors_full", [&](const std::string& v) { descriptors_full = v; }},
        {"shot_radius", [&](const std::string& v) { shot_radius = parse_double(v); }},
        {"k", [&](const std::string& v) { energy.k = parse_index(v); }},
        {"mu1", [&](const std::string& v) { energy.mu1 = parse_double(v); }},
        {"mu2", [&](const std::string& v) { energy.mu2 = parse_double(v); }},
        {"mu3", [&](const std::string& v) { energy.mu3 = parse_double(v); }},
        {"mu4_5", [&](const std::string& v) { energy.mu4_5 = parse_double(v); }},
        {"sigma_w", [&](const std::string& v) { energy.sigma_w = parse_double(v); }},
        {"sigma_xi", [&](const std::string& v) { energy.sigma_xi = parse_double(v); }},
        {"ms_smoothing", [&](const std::string& v) { energy.ms_smoothing = parse_double(v); }},
        {"max_outer", [&](const std::string& v) { solver.max_outer = as_int(v); }},
        {"cg_max_iter", [&](const std::string& v) { solver.cg_max_iter = as_int(v); }},
        {"cg_grad_tol", [&](const std::string& v) { solver.cg_grad_tol = parse_double(v); }},
        {"armijo", [&](const std::string& v) { solver.armijo = parse_double(v); }},
        {"backtrack", [&](const std::string& v) { solver.backtrack = parse_double(v); }},
        {"max_backtracks", [&](const std::string& v) { solver.max_backtracks = as_int(v); }},
        {"refine", [&](const std::string& v) { solver.refine = as_bool(v); }},
        {"refine_max", [&](const std::string& v) { solver.refine_max = as_int(v); }},
        {"refine_tol", [&](const std::string& v) { solver.refine_tol = parse_double(v); }},
        {"refine_energy_guard", [&](const std::string& v) { solver.refine_energy_guard = as_bool(v); }},
        {"outer_tol", [&](const std::string& v) { solver.outer_tol = parse_double(v); }},
        {"jobs", [&](const std::string& v) { jobs = as_int(v); }},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw InputError("config: unknown key '" + key + "'");
    it->second(value);
  }

  /// Reads key=value lines; '#' starts a comment.
  void load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    std::string line;
    int number = 0;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
      ++number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InputError(path.string() + ":" + std::to_string(number) + ": expected key=value");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  /// Checks ranges and that referenced files exist.
  void validate() const {
    energy.validate();
    solver.validate();
    if (jobs < 1) throw InputError("jobs must be at least 1");
    if (shot_radius < 0.0) throw InputError("shot_radius must be non-negative");
    auto must_exist = [](const std::filesystem::path& p, const char* what) {
      if (p.empty()) throw InputError(std::string("missing ") + what + " path");
      if (!std::filesystem::exists(p)) throw InputError(std::string(what) + " not found: " + p.string());
    };
    must_exist(part, "part mesh");
    must_exist(full, "full mesh");
    if (!descriptors_part.empty() || !descriptors_full.empty()) {
      must_exist(descriptors_part, "part descriptors");
      must_exist(descriptors_full, "full descriptors");
    }
  }
};

} // namespace pfm
