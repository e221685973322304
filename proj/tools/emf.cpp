// emf: command-line front end for sampling, flows, observables, verification
// checks and experiments. Exit codes: 0 all checks pass, 1 a check failed,
// 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "emf/emf.hpp"

namespace fs = std::filesystem;
using emf::io::json;

namespace {

constexpr const char* tool_version = "0.1.0";

/// SHA-1 of "blob <size>\0<content>", the object id git assigns to a file.
std::string git_blob_hash(const std::string& content) {
  const std::string object = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(object.data(), object.size(), digest, &length, EVP_sha1(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char c = digest[i];
    std::snprintf(buf, sizeof buf, "%02x", c);
    hex += buf;
  }
  return hex;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw emf::Error(emf::Errc::ConfigParse, "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t base_seed = 0;
  std::string version = tool_version;
  std::string hash;  // of the config file, or of the canonical command line without one
  std::string output_dir;

  json to_json() const {
    return {{"command", command},   {"config", config_path}, {"base_seed", base_seed},
            {"version", version},   {"hash", hash},          {"output_dir", output_dir}};
  }
};

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out = ".";
  std::string config;
  unsigned threads = 0;
};

/// Sets up the output directory, worker count and manifest shared by every command.
class Run {
 public:
  Run(const Globals& g, std::string command) : g_(g) {
    m_.command = std::move(command);
    m_.config_path = g.config;
    m_.output_dir = g.out;
    if (!g.config.empty()) {
      cfg_ = emf::config::load(g.config);
      m_.hash = git_blob_hash(slurp(g.config));
    }
    if (g.threads > 0) emf::set_worker_count(g.threads);
    m_.base_seed = g.seed_given ? g.seed : (cfg_ ? cfg_->spec.base_seed : seed_from_env(g.seed));
    if (cfg_) cfg_->spec.base_seed = m_.base_seed;
    if (m_.hash.empty()) m_.hash = git_blob_hash(m_.command + " seed=" + std::to_string(m_.base_seed));
    fs::create_directories(g.out);
    emf::io::write_json(path("manifest.json"), m_.to_json());
  }

  std::string path(const std::string& name) const { return (fs::path(g_.out) / name).string(); }
  const RunManifest& manifest() const { return m_; }
  std::uint64_t seed() const { return m_.base_seed; }
  const emf::config::Config& config() const {
    if (!cfg_) throw emf::Error(emf::Errc::ConfigParse, "this command needs --config");
    return *cfg_;
  }

  emf::io::CsvWriter csv(const std::string& name, const std::vector<std::string>& header) const {
    return emf::io::CsvWriter(path(name), header, m_.hash);
  }
  void write_json(const std::string& name, json j) const {
    j["manifest"] = m_.hash;
    emf::io::write_json(path(name), j);
  }
  void append_trailer(const std::string& name) const {
    std::ofstream os(path(name), std::ios::binary | std::ios::app);
    os.write("MANI", 4);
    os << m_.hash;
  }

 private:
  static std::uint64_t seed_from_env(std::uint64_t fallback) {
    if (const char* env = std::getenv("EMF_SEED"))
      return emf::config::detail::convert<std::uint64_t>("EMF_SEED", env);
    return fallback;
  }

  Globals g_;
  RunManifest m_;
  std::optional<emf::config::Config> cfg_;
};

/// {experiment, estimate, stderr, target, pass} summary.
json summary(const std::string& name, double estimate, double stderr_, double target, bool pass) {
  return {{"experiment", name}, {"estimate", estimate}, {"stderr", stderr_}, {"target", target}, {"pass", pass}};
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(static_cast<std::size_t>(std::stoull(item)));
    } catch (const std::exception&) {
      throw emf::Error(emf::Errc::InvalidArgument, "expected a comma-separated index list, got '" + s + "'");
    }
  }
  return out;
}

emf::EnsembleSpec ensemble_from(const std::string& kind, std::size_t n) {
  if (kind == "goe") return emf::EnsembleSpec::goe(n);
  if (kind == "gue") return emf::EnsembleSpec::gue(n);
  if (kind == "bernoulli") return emf::EnsembleSpec::bernoulli(n);
  throw emf::Error(emf::Errc::InvalidArgument, "unknown ensemble '" + kind + "'");
}

// --- sample ------------------------------------------------------------------

struct SampleArgs {
  std::string ensemble = "goe";
  std::size_t n = 100;
  double divisible = 0.0;
  std::string profile;
};

template <class Scalar>
void write_sample(const Run& run, const emf::RandomMatrix<Scalar>& h) {
  emf::io::save_matrix(run.path("matrix.emf1"), h.entries);
  run.append_trailer("matrix.emf1");
  const auto sd = emf::decompose(h);
  auto csv = run.csv("eigenvalues.csv", {"index", "lambda"});
  for (Eigen::Index k = 0; k < sd.lambdas.size(); ++k) csv.values(static_cast<long>(k), sd.lambdas[k]);
}

int cmd_sample(const Globals& g, const SampleArgs& a) {
  Run run(g, "sample --ensemble " + a.ensemble + " --n " + std::to_string(a.n) + " --divisible " +
                 emf::io::format_double(a.divisible) + " --profile " + a.profile);
  auto spec = ensemble_from(a.ensemble, a.n);
  if (!a.profile.empty()) spec.profile = emf::build_variance_profile(emf::io::load_profile_csv(a.profile));
  if (spec.symmetry == emf::Symmetry::hermitian) {
    auto h = emf::sample<emf::cplx>(spec, run.seed());
    if (a.divisible > 0) h = emf::gaussian_divisible(h, a.divisible, run.seed());
    write_sample(run, h);
  } else {
    auto h = emf::sample<double>(spec, run.seed());
    if (a.divisible > 0) h = emf::gaussian_divisible(h, a.divisible, run.seed());
    write_sample(run, h);
  }
  return 0;
}

// --- flow --------------------------------------------------------------------

struct FlowArgs {
  std::string in;
  std::string ensemble = "goe";
  std::size_t n = 20;
  double s = 0.5;
  double dt = 1e-3;
  std::string mode = "eigen";
  std::size_t reorth = 1;
};

int cmd_flow(const Globals& g, const FlowArgs& a) {
  Run run(g, "flow --in " + a.in + " --ensemble " + a.ensemble + " --n " + std::to_string(a.n) + " --s " +
                 emf::io::format_double(a.s) + " --dt " + emf::io::format_double(a.dt) + " --mode " + a.mode +
                 " --reorth " + std::to_string(a.reorth));
  emf::RealMatrix h0;
  if (!a.in.empty()) {
    h0.entries = emf::io::load_matrix<double>(a.in);
  } else {
    h0 = emf::sample<double>(ensemble_from(a.ensemble, a.n), run.seed());
  }
  emf::FlowConfig cfg;
  cfg.dt = a.dt;
  cfg.t_end = a.s;
  cfg.reorthonormalize_every = a.reorth;

  Eigen::VectorXd lambdas;
  if (a.mode == "eigen") {
    const auto res = emf::evolve_eigen(emf::decompose(h0), a.s, cfg, emf::rng::derive(run.seed(), {1}),
                                       emf::rng::derive(run.seed(), {2}));
    emf::io::save_path(run.path("path.emf1"), res.path);
    run.append_trailer("path.emf1");
    emf::io::save_matrix(run.path("vectors.emf1"), res.final_state.vectors);
    run.append_trailer("vectors.emf1");
    lambdas = res.final_state.lambdas;
    run.write_json("flow.json", {{"mode", a.mode},
                                 {"steps", res.diagnostics.steps},
                                 {"halvings", res.diagnostics.halvings},
                                 {"max_gram_drift", res.diagnostics.max_gram_drift}});
  } else if (a.mode == "matrix" || a.mode == "exact") {
    emf::RealMatrix h1 = a.mode == "exact" ? emf::evolve_matrix_exact(h0, a.s, run.seed())
                                           : emf::RealMatrix{h0.symmetry,
                                                             emf::evolve_matrix_em(h0, a.s, cfg, run.seed()).matrices.back(),
                                                             h0.provenance};
    emf::io::save_matrix(run.path("matrix.emf1"), h1.entries);
    run.append_trailer("matrix.emf1");
    lambdas = emf::decompose(h1).lambdas;
    run.write_json("flow.json", {{"mode", a.mode}});
  } else {
    throw emf::Error(emf::Errc::InvalidArgument, "flow mode must be eigen, matrix or exact");
  }
  auto csv = run.csv("eigenvalues.csv", {"index", "lambda"});
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) csv.values(static_cast<long>(k), lambdas[k]);
  return 0;
}

// --- observe -----------------------------------------------------------------

struct ObserveArgs {
  std::string in;
  bool vectors = false;
  std::string I;
  std::string k;
};

int cmd_observe(const Globals& g, const ObserveArgs& a) {
  Run run(g, "observe --in " + a.in + (a.vectors ? " --vectors" : "") + " --I " + a.I + " --k " + a.k);
  if (a.in.empty()) throw emf::Error(emf::Errc::InvalidArgument, "observe needs --in");
  const Eigen::MatrixXd m = emf::io::load_matrix<double>(a.in);
  const Eigen::MatrixXd U = a.vectors ? m : emf::decompose(m).vectors;
  const auto n = static_cast<std::size_t>(U.rows());
  const auto I = parse_list(a.I);
  const auto k = parse_list(a.k);
  const auto fam = emf::ProjectionFamily::canonical(I, n);
  const auto ov = emf::overlaps(U, fam, k);

  auto csv = run.csv("overlaps.csv", {"k", "l", "p"});
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = i; j < k.size(); ++j)
      csv.values(static_cast<long>(k[i]), static_cast<long>(k[j]),
                 ov.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  const auto cfg = emf::ParticleConfig::from_sites(k);
  const auto bos = emf::bosonic_values(cfg, ov);
  json out = {{"C0", fam.C0},
              {"bosonic", bos.hafnian / static_cast<double>(emf::bosonic_normalization(cfg))},
              {"hafnian", bos.hafnian}};
  if (cfg.fermionic()) out["fermionic"] = emf::fermionic_value(emf::fluctuation_matrix(ov, k));
  run.write_json("observables.json", out);
  return 0;
}

// --- verify ------------------------------------------------------------------

struct VerifyArgs {
  std::string check;
  unsigned n = 2;
  std::size_t N = 3;
  unsigned m = 2;
  std::size_t trials = 10;
  std::size_t replicas = 20000;
  unsigned max_dim = 10;
};

int verify_generator(const Run& run, const VerifyArgs& a) {
  if (a.n < 1 || a.n > 4) throw emf::Error(emf::Errc::InvalidArgument, "--n must be in 1..4");
  emf::rng::Stream pick(emf::rng::domain_key(run.seed(), emf::rng::Domain::auxiliary));
  json rows = json::array();
  bool pass = true;
  for (std::size_t t = 0; t < a.trials; ++t) {
    // n + 1 distinct sites out of 0..3n+3
    std::vector<std::uint32_t> sites(3 * a.n + 4);
    std::iota(sites.begin(), sites.end(), 0u);
    for (std::size_t i = 0; i + 1 < sites.size(); ++i)
      std::swap(sites[i], sites[i + pick.next_u64() % (sites.size() - i)]);
    std::vector<std::uint32_t> k(sites.begin(), sites.begin() + a.n);
    const auto rep = emf::generator_identity_check(k, sites[a.n]);
    pass = pass && rep.pass;
    for (const auto& r : rep.rows)
      rows.push_back({{"tuple", r.tuple}, {"identity", r.identity}, {"residual", r.residual}, {"pass", r.pass}});
  }
  run.write_json("verify_generator.json", {{"check", "generator"}, {"n", a.n}, {"pass", pass}, {"rows", rows}});
  return pass ? 0 : 1;
}

Eigen::MatrixXd random_spd(std::size_t N, emf::rng::Stream& s) {
  Eigen::MatrixXd A(N, N);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = s.normal();
  return A * A.transpose() / static_cast<double>(N) + Eigen::MatrixXd::Identity(N, N);
}

int verify_wick(const Run& run, const VerifyArgs& a) {
  if (a.N < 1 || a.N > 6) throw emf::Error(emf::Errc::InvalidArgument, "--N must be in 1..6");
  if (a.m < 1 || a.m > 3) throw emf::Error(emf::Errc::InvalidArgument, "--m must be in 1..3");
  emf::rng::Stream s(emf::rng::domain_key(run.seed(), emf::rng::Domain::covariance));
  bool pass = true;
  std::size_t checked = 0;
  double worst = 0.0;
  auto csv = run.csv("verify_wick.csv", {"covariance", "tuple", "lhs", "rhs", "delta"});
  for (std::size_t c = 0; c < a.trials; ++c) {
    const emf::grassmann::Covariance cov{random_spd(a.N, s), s.uniform()};
    const emf::grassmann::GaussianMeasure measure(cov);
    std::size_t total = 1;
    for (unsigned i = 0; i < 2 * a.m; ++i) total *= a.N;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<std::pair<std::size_t, std::size_t>> pairs(a.m);
      std::size_t rest = code;
      std::string label;
      for (auto& [i, j] : pairs) {
        i = rest % a.N;
        rest /= a.N;
        j = rest % a.N;
        rest /= a.N;
        label += std::to_string(i) + ":" + std::to_string(j) + " ";
      }
      const auto r = emf::grassmann::wick_check(pairs, measure, cov);
      pass = pass && r.pass;
      worst = std::max(worst, r.delta);
      ++checked;
      csv.values(static_cast<long>(c), label, r.lhs.real(), r.rhs.real(), r.delta);
    }
  }
  run.write_json("verify_wick.json",
                 {{"check", "wick"}, {"N", a.N}, {"m", a.m}, {"checked", checked}, {"max_delta", worst}, {"pass", pass}});
  return pass ? 0 : 1;
}

int verify_flow(const Run& run, const VerifyArgs& a) {
  emf::FlowResidualSpec spec;
  spec.I = {0, 1, 2, 3, 4};
  spec.k = {9, 10};
  spec.replicas = a.replicas;
  spec.path_seed = emf::rng::derive(run.seed(), {1});
  spec.vector_seed = emf::rng::derive(run.seed(), {2});
  const auto rep = emf::flow_residual_check(spec);
  auto csv = run.csv("verify_flow.csv", {"ds", "f_start", "f_end", "finite_difference", "rhs", "stderr", "z"});
  json rows = json::array();
  for (const auto& r : rep.rows) {
    csv.values(r.ds, r.f_start, r.f_end, r.finite_difference, r.rhs, r.stderr_, r.z);
    rows.push_back({{"ds", r.ds}, {"z", r.z}, {"pass", r.pass}});
  }
  run.write_json("verify_flow.json", {{"check", "flow"}, {"replicas", a.replicas}, {"pass", rep.pass}, {"rows", rows}});
  return rep.pass ? 0 : 1;
}

/// Sum over perfect matchings, enumerated explicitly.
double matchings_sum(const Eigen::MatrixXd& a, std::vector<int>& free_sites) {
  if (free_sites.empty()) return 1.0;
  const int i = free_sites.front();
  double total = 0.0;
  for (std::size_t p = 1; p < free_sites.size(); ++p) {
    const int j = free_sites[p];
    std::vector<int> rest;
    for (std::size_t q = 1; q < free_sites.size(); ++q)
      if (q != p) rest.push_back(free_sites[q]);
    total += a(i, j) * matchings_sum(a, rest);
  }
  return total;
}

int verify_hafnian(const Run& run, const VerifyArgs& a) {
  emf::rng::Stream s(emf::rng::domain_key(run.seed(), emf::rng::Domain::auxiliary));
  bool pass = true;
  auto csv = run.csv("verify_hafnian.csv", {"kind", "dim", "fast", "enumerated", "relative_error"});
  for (unsigned d = 2; d <= a.max_dim; d += 2) {
    Eigen::MatrixXd A(d, d);
    for (unsigned i = 0; i < d; ++i)
      for (unsigned j = i; j < d; ++j) A(i, j) = A(j, i) = s.normal();
    std::vector<int> sites(d);
    std::iota(sites.begin(), sites.end(), 0);
    const double fast = emf::hafnian(A), slow = matchings_sum(A, sites);
    const double rel = std::abs(fast - slow) / std::max(1.0, std::abs(slow));
    pass = pass && rel <= 1e-12;
    csv.values(std::string("hafnian"), static_cast<long>(d), fast, slow, rel);
  }
  for (unsigned d = 1; d <= std::min(a.max_dim, 7u); ++d) {
    Eigen::MatrixXd A(d, d);
    for (unsigned i = 0; i < d; ++i)
      for (unsigned j = 0; j < d; ++j) A(i, j) = s.normal();
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    double slow = 0.0;
    do {
      double prod = 1.0;
      for (unsigned i = 0; i < d; ++i) prod *= A(i, perm[i]);
      slow += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double fast = emf::permanent(A);
    const double rel = std::abs(fast - slow) / std::max(1.0, std::abs(slow));
    pass = pass && rel <= 1e-12;
    csv.values(std::string("permanent"), static_cast<long>(d), fast, slow, rel);
  }
  run.write_json("verify_hafnian.json", {{"check", "hafnian"}, {"pass", pass}});
  return pass ? 0 : 1;
}

int verify_semicircle(const Run& run, const VerifyArgs& a) {
  const std::size_t n = a.N < 10 ? 1000 : a.N;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const emf::cplx z(-3.0 + 6.0 * (i % 40) / 39.0, 1e-3 + 2.0 * (i / 40) / 24.0);
    const emf::cplx m = emf::semicircle_stieltjes(z);
    worst = std::max(worst, std::abs(m * m + z * m + 1.0));
  }
  const auto sd = emf::decompose(emf::sample<double>(emf::EnsembleSpec::goe(n), run.seed()));
  const double ks = emf::ks_distance_to_semicircle(sd.lambdas);
  // KS distance of a GOE spectrum is O(log n / n); 1/sqrt(n) leaves a wide margin.
  const double ks_bound = 1.0 / std::sqrt(static_cast<double>(n));
  const bool pass = worst <= 1e-12 && ks <= ks_bound;
  run.write_json("verify_semicircle.json", {{"check", "semicircle"},
                                            {"n", n},
                                            {"max_equation_residual", worst},
                                            {"ks_distance", ks},
                                            {"ks_bound", ks_bound},
                                            {"pass", pass}});
  return pass ? 0 : 1;
}

int cmd_verify(const Globals& g, const VerifyArgs& a) {
  Run run(g, "verify " + a.check + " --n " + std::to_string(a.n) + " --N " + std::to_string(a.N) + " --m " +
                 std::to_string(a.m) + " --trials " + std::to_string(a.trials) + " --replicas " +
                 std::to_string(a.replicas) + " --max-dim " + std::to_string(a.max_dim));
  if (a.check == "generator") return verify_generator(run, a);
  if (a.check == "wick") return verify_wick(run, a);
  if (a.check == "flow") return verify_flow(run, a);
  if (a.check == "hafnian") return verify_hafnian(run, a);
  if (a.check == "semicircle") return verify_semicircle(run, a);
  throw emf::Error(emf::Errc::UnknownCommand, "unknown verification '" + a.check + "'");
}

// --- experiment --------------------------------------------------------------

struct ExperimentArgs {
  std::string name;
  std::size_t seeds = 100;
  double z_re = 0.0;
  double z_im = 0.05;
  std::size_t j = 0;
  std::size_t alpha = 0;
  std::size_t beta = 1;
  unsigned n = 4;
  std::string alphas = "0,1,2";
  std::string cache;
};

int cmd_experiment(const Globals& g, const ExperimentArgs& a) {
  Run run(g, "experiment " + a.name);
  const auto& spec = run.config().spec;
  const std::size_t N = spec.N, m = spec.I_size();
  auto three_se = [](double est, double se, double target) { return std::abs(est - target) <= 3.0 * se; };

  if (a.name == "decorrelation" || a.name == "variance") {
    const auto draws = emf::draw_overlaps(spec, a.cache);
    const bool dec = a.name == "decorrelation";
    const auto est = dec ? emf::decorrelation_from(draws, N, m) : emf::overlap_variance_from(draws, N, m);
    const double target = dec ? emf::haar_decorrelation_value(N, m) : emf::haar_variance_value(N, m);
    auto csv = run.csv(a.name + ".csv", {"N", "I", "k", "l", "replicas", "estimate", "stderr", "haar"});
    csv.values(static_cast<long>(N), static_cast<long>(m), static_cast<long>(spec.k()), static_cast<long>(spec.l()),
               static_cast<long>(est.replicas), est.mean, est.stderr_, target);
    const bool pass = three_se(est.mean, est.stderr_, target);
    run.write_json(a.name + ".json", summary(a.name, est.mean, est.stderr_, target, pass));
    return pass ? 0 : 1;
  }
  if (a.name == "tail") {
    const auto rows = emf::tail_check(spec, {2.0, 3.0, 4.0}, a.cache);
    auto csv = run.csv("tail.csv", {"level", "probability", "stderr", "envelope"});
    bool pass = true;
    for (const auto& r : rows) {
      csv.values(r.level, r.probability, r.stderr_, r.envelope);
      pass = pass && r.probability <= 1.5 * r.envelope;
    }
    run.write_json("tail.json", summary("tail", rows.front().probability, rows.front().stderr_,
                                        1.5 * rows.front().envelope, pass));
    return pass ? 0 : 1;
  }
  if (a.name == "que") {
    const auto rep = emf::que_bound_check(spec, a.seeds);
    auto csv = run.csv("que.csv", {"seed", "sup", "ratio"});
    for (const auto& r : rep.rows) csv.values(r.seed, r.sup, r.ratio);
    const bool pass = rep.fraction_within >= 0.95;
    auto j = summary("que", rep.fraction_within, 0.0, 0.95, pass);
    j["psi1"] = rep.psi1;
    j["bound"] = rep.bound;
    run.write_json("que.json", j);
    return pass ? 0 : 1;
  }
  if (a.name == "resolvent") {
    const auto rep = emf::resolvent_decorrelation_check(spec, {a.z_re, a.z_im}, a.j, a.alpha, a.beta);
    auto csv = run.csv("resolvent.csv", {"estimate", "stderr", "psi2", "bound", "ratio", "trivial_envelope"});
    csv.values(rep.estimate.mean, rep.estimate.stderr_, rep.psi2, rep.bound, rep.ratio, rep.trivial_envelope);
    const bool pass = rep.ratio <= 1.0;
    auto j = summary("resolvent", rep.estimate.mean, rep.estimate.stderr_, 0.0, pass);
    j["bound"] = rep.bound;
    j["ratio"] = rep.ratio;
    run.write_json("resolvent.json", j);
    return pass ? 0 : 1;
  }
  if (a.name == "gaussdet") {
    const auto est = emf::gaussian_det_mc(a.n, spec.replicas, spec.base_seed);
    const double target = static_cast<double>(emf::gaussian_det_moment(a.n));
    auto csv = run.csv("gaussdet.csv", {"n", "replicas", "estimate", "stderr", "target"});
    csv.values(static_cast<long>(a.n), static_cast<long>(est.replicas), est.mean, est.stderr_, target);
    const bool pass = three_se(est.mean, est.stderr_, target);
    run.write_json("gaussdet.json", summary("gaussdet", est.mean, est.stderr_, target, pass));
    return pass ? 0 : 1;
  }
  if (a.name == "gaussianity") {
    const auto rows = emf::entry_gaussianity(spec, parse_list(a.alphas), spec.k(), 4);
    auto csv = run.csv("gaussianity.csv", {"alpha", "beta", "order", "estimate", "stderr", "gaussian"});
    bool pass = true;
    for (const auto& r : rows) {
      csv.values(static_cast<long>(r.alpha), static_cast<long>(r.beta), static_cast<long>(r.order), r.estimate,
                 r.stderr_, r.gaussian);
      pass = pass && three_se(r.estimate, r.stderr_, r.gaussian);
    }
    run.write_json("gaussianity.json", summary("gaussianity", rows.front().estimate, rows.front().stderr_,
                                               rows.front().gaussian, pass));
    return pass ? 0 : 1;
  }
  throw emf::Error(emf::Errc::UnknownCommand, "unknown experiment '" + a.name + "'");
}

int exit_code_for(emf::Errc code) {
  switch (code) {
    case emf::Errc::ConfigParse:
    case emf::Errc::UnknownCommand:
    case emf::Errc::InvalidArgument: return 2;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eigenvector moment flow toolkit"};
  app.set_version_flag("--version", tool_version);
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { g.seed = v, g.seed_given = true; },
                                             "Base seed");
    sub->add_option("--out", g.out, "Output directory");
    sub->add_option("--config", g.config, "Experiment config file");
    sub->add_option("--threads", g.threads, "Worker count");
  };

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Draw a Wigner matrix");
  add_globals(sample);
  sample->add_option("--ensemble", sa.ensemble)->check(CLI::IsMember({"goe", "gue", "bernoulli"}));
  sample->add_option("--n", sa.n);
  sample->add_option("--divisible", sa.divisible, "Gaussian-divisible time s");
  sample->add_option("--profile", sa.profile, "Variance profile CSV");

  FlowArgs fa;
  auto* flow = app.add_subcommand("flow", "Run a Dyson flow");
  add_globals(flow);
  flow->add_option("--in", fa.in, "Initial matrix (EMF1)");
  flow->add_option("--ensemble", fa.ensemble)->check(CLI::IsMember({"goe", "bernoulli"}));
  flow->add_option("--n", fa.n);
  flow->add_option("--s", fa.s);
  flow->add_option("--dt", fa.dt);
  flow->add_option("--mode", fa.mode)->check(CLI::IsMember({"eigen", "matrix", "exact"}));
  flow->add_option("--reorth", fa.reorth);

  ObserveArgs oa;
  auto* observe = app.add_subcommand("observe", "Overlaps and observables of a matrix or basis");
  add_globals(observe);
  observe->add_option("--in", oa.in)->required();
  observe->add_flag("--vectors", oa.vectors, "Input holds eigenvectors as columns");
  observe->add_option("--I", oa.I, "Index set, comma separated")->required();
  observe->add_option("--k", oa.k, "Eigenvector indices, comma separated")->required();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run a verification check");
  add_globals(verify);
  verify->add_option("check", va.check)->required();
  verify->add_option("--n", va.n, "Tuple size (generator)");
  verify->add_option("--N", va.N, "Dimension (wick, semicircle)");
  verify->add_option("--m", va.m, "Pair count (wick)");
  verify->add_option("--trials", va.trials);
  verify->add_option("--replicas", va.replicas);
  verify->add_option("--max-dim", va.max_dim);

  ExperimentArgs ea;
  auto* experiment = app.add_subcommand("experiment", "Run a configured experiment");
  add_globals(experiment);
  experiment->add_option("name", ea.name)->required();
  experiment->add_option("--seeds", ea.seeds);
  experiment->add_option("--z-re", ea.z_re);
  experiment->add_option("--z-im", ea.z_im);
  experiment->add_option("--j", ea.j);
  experiment->add_option("--alpha", ea.alpha);
  experiment->add_option("--beta", ea.beta);
  experiment->add_option("--n", ea.n);
  experiment->add_option("--alphas", ea.alphas);
  experiment->add_option("--cache", ea.cache, "Directory for cached overlap draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    if (dynamic_cast<const CLI::ExtrasError*>(&e)) std::cerr << "UnknownCommand: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*sample) return cmd_sample(g, sa);
    if (*flow) return cmd_flow(g, fa);
    if (*observe) return cmd_observe(g, oa);
    if (*verify) return cmd_verify(g, va);
    if (*experiment) return cmd_experiment(g, ea);
  } catch (const emf::Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
