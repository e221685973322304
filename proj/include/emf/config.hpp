#pragma once

// Declarative experiment configuration (ini syntax):
//
//   [ensemble]
//   kind = goe            ; goe | gue | bernoulli
//   profile = flat.csv    ; optional variance profile, relative to the config file
//   [experiment]
//   N = 100
//   replicas = 1000
//   index_exponent = 0.5  ; or index_size = 10
//   k = bulk              ; bulk[+-offset] | edge[+offset]
//   l = bulk+1
//   s = 0.0
//   seed = 1
//   [exponents]
//   epsilon = 0.2         ; any of theta omega xi delta1 delta2 epsilon
//
// EMF_SEED overrides experiment.seed; EMF_THREADS sets the worker count.

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "emf/core.hpp"
#include "emf/ensembles.hpp"
#include "emf/io.hpp"
#include "emf/parallel.hpp"
#include "emf/stats.hpp"

namespace emf::config {

namespace pt = boost::property_tree;

namespace detail {

template <class T>
T convert(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, double>) v = std::stod(raw, &used);
    else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!raw.empty() && raw[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<T>(std::stoull(raw, &used));
    } else v = static_cast<T>(std::stol(raw, &used));
    if (used != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::ConfigParse, "config key '" + key + "' has invalid value '" + raw + "'");
  }
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses "bulk", "bulk+3", "bulk-1", "edge", "edge+2".
inline IndexSelector parse_selector(const std::string& key, const std::string& raw) {
  IndexSelector sel;
  std::string rest;
  if (raw.rfind("bulk", 0) == 0) {
    sel.kind = IndexSelector::Kind::bulk;
    rest = raw.substr(4);
  } else if (raw.rfind("edge", 0) == 0) {
    sel.kind = IndexSelector::Kind::edge;
    rest = raw.substr(4);
  } else {
    throw Error(Errc::ConfigParse, "config key '" + key + "' must be bulk[+-n] or edge[+n], got '" + raw + "'");
  }
  if (!rest.empty()) {
    if (rest[0] != '+' && rest[0] != '-')
      throw Error(Errc::ConfigParse, "config key '" + key + "' has invalid offset '" + rest + "'");
    sel.offset = detail::convert<long>(key, rest[0] == '+' ? rest.substr(1) : rest);
  }
  return sel;
}

struct Config {
  ExperimentSpec spec;
  std::string path;
  std::string profile_path;  // resolved, empty without a profile
  pt::ptree tree;

  /// Value of "section.key" or nullopt.
  std::optional<std::string> get(const std::string& key) const {
    if (auto v = tree.get_optional<std::string>(key)) return detail::trim(*v);
    return std::nullopt;
  }
  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v || v->empty()) throw Error(Errc::ConfigParse, "missing config key '" + key + "'");
    return *v;
  }
  template <class T>
  T number(const std::string& key, T fallback) const {
    auto v = get(key);
    return v ? detail::convert<T>(key, *v) : fallback;
  }
  template <class T>
  T required_number(const std::string& key) const {
    return detail::convert<T>(key, require(key));
  }
};

inline EnsembleKind parse_kind(const std::string& raw) {
  if (raw == "goe") return EnsembleKind::goe;
  if (raw == "gue") return EnsembleKind::gue;
  if (raw == "bernoulli" || raw == "bernoulli_wigner") return EnsembleKind::bernoulli_wigner;
  throw Error(Errc::ConfigParse, "config key 'ensemble.kind' must be goe, gue or bernoulli, got '" + raw + "'");
}

/// Reads and validates a config file. Environment overrides are applied last.
inline Config load(const std::string& path) {
  Config cfg;
  cfg.path = path;
  try {
    pt::read_ini(path, cfg.tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::ConfigParse, std::string("cannot parse config: ") + e.what());
  }

  auto& spec = cfg.spec;
  spec.N = cfg.required_number<std::size_t>("experiment.N");
  if (spec.N == 0) throw Error(Errc::ConfigParse, "config key 'experiment.N' must be positive");
  spec.replicas = cfg.required_number<std::size_t>("experiment.replicas");
  spec.index_exponent = cfg.number<double>("experiment.index_exponent", spec.index_exponent);
  spec.index_size = cfg.number<std::size_t>("experiment.index_size", 0);
  spec.s = cfg.number<double>("experiment.s", 0.0);
  spec.base_seed = cfg.number<std::uint64_t>("experiment.seed", spec.base_seed);
  if (auto k = cfg.get("experiment.k")) spec.k_rule = parse_selector("experiment.k", *k);
  if (auto l = cfg.get("experiment.l")) spec.l_rule = parse_selector("experiment.l", *l);

  const EnsembleKind kind = parse_kind(cfg.require("ensemble.kind"));
  const std::size_t n = cfg.number<std::size_t>("ensemble.n", spec.N);
  if (n != spec.N) throw Error(Errc::ConfigParse, "config key 'ensemble.n' disagrees with experiment.N");
  switch (kind) {
    case EnsembleKind::goe: spec.ensemble = EnsembleSpec::goe(n); break;
    case EnsembleKind::gue: spec.ensemble = EnsembleSpec::gue(n); break;
    default: {
      Symmetry sym = Symmetry::symmetric;
      if (auto s = cfg.get("ensemble.symmetry")) {
        if (*s == "hermitian") sym = Symmetry::hermitian;
        else if (*s != "symmetric")
          throw Error(Errc::ConfigParse, "config key 'ensemble.symmetry' must be symmetric or hermitian");
      }
      spec.ensemble = EnsembleSpec::bernoulli(n, sym);
    }
  }
  if (auto p = cfg.get("ensemble.profile")) {
    std::filesystem::path resolved(*p);
    if (resolved.is_relative()) resolved = std::filesystem::path(path).parent_path() / resolved;
    cfg.profile_path = resolved.string();
    try {
      spec.ensemble.profile = build_variance_profile(io::load_profile_csv(cfg.profile_path));
    } catch (const Error& e) {
      if (e.code() == Errc::Io || e.code() == Errc::ConfigParse)
        throw Error(Errc::ConfigParse, "config key 'ensemble.profile': " + std::string(e.what()));
      throw;
    }
  }

  auto& ex = spec.exponents;
  ex.theta = cfg.number<double>("exponents.theta", ex.theta);
  ex.omega = cfg.number<double>("exponents.omega", ex.omega);
  ex.xi = cfg.number<double>("exponents.xi", ex.xi);
  ex.delta1 = cfg.number<double>("exponents.delta1", ex.delta1);
  ex.delta2 = cfg.number<double>("exponents.delta2", ex.delta2);
  ex.epsilon = cfg.number<double>("exponents.epsilon", ex.epsilon);

  if (const char* env = std::getenv("EMF_SEED")) spec.base_seed = detail::convert<std::uint64_t>("EMF_SEED", env);
  if (const char* env = std::getenv("EMF_THREADS")) {
    const auto t = detail::convert<std::size_t>("EMF_THREADS", env);
    if (t > 0) set_worker_count(static_cast<unsigned>(t));
  }
  return cfg;
}

}  // namespace emf::config
