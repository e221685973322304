#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "emf/config.hpp"
#include "emf/io.hpp"

using namespace emf;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no emf::Error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Io, MatrixRoundTripIsBitExact) {
  TempDir dir("emf_io_matrix");
  const auto real = sample<double>(EnsembleSpec::goe(17), 2).entries;
  io::save_matrix(dir.file("r.emf1"), real);
  EXPECT_TRUE((io::load_matrix<double>(dir.file("r.emf1")).array() == real.array()).all());
  EXPECT_EQ(io::peek_kind(dir.file("r.emf1")), 0);

  const auto cx = sample<cplx>(EnsembleSpec::gue(9), 3).entries;
  io::save_matrix(dir.file("c.emf1"), cx);
  EXPECT_TRUE((io::load_matrix<cplx>(dir.file("c.emf1")).array() == cx.array()).all());
  EXPECT_EQ(code_of([&] { io::load_matrix<double>(dir.file("c.emf1")); }), Errc::Io);
  EXPECT_EQ(fs::file_size(dir.file("r.emf1")), 4u + 8u + 1u + 17u * 17u * 8u);
}

TEST(Io, PathRoundTrip) {
  TempDir dir("emf_io_path");
  EigenPath p{{0.0, 0.1, 0.25}, {Eigen::Vector3d(-1, 0, 1), Eigen::Vector3d(-1.1, 0.05, 0.9), Eigen::Vector3d(-1.2, 0.1, 1.3)}, 42};
  io::save_path(dir.file("p.emf1"), p);
  const auto q = io::load_path(dir.file("p.emf1"));
  EXPECT_EQ(q.times, p.times);
  EXPECT_EQ(q.noise_seed, 42u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE((q.lambdas_at[i].array() == p.lambdas_at[i].array()).all());
  EXPECT_EQ(io::peek_kind(dir.file("p.emf1")), 2);
}

TEST(Io, TrailingBytesAreIgnoredAndTruncationDetected) {
  TempDir dir("emf_io_trailer");
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  io::save_matrix(dir.file("m.emf1"), m);
  std::ofstream(dir.file("m.emf1"), std::ios::binary | std::ios::app) << "MANI0123456789abcdef";
  EXPECT_TRUE((io::load_matrix<double>(dir.file("m.emf1")).array() == m.array()).all());
  fs::resize_file(dir.file("m.emf1"), 20);
  EXPECT_EQ(code_of([&] { io::load_matrix<double>(dir.file("m.emf1")); }), Errc::Io);
  write_text(dir.file("bad.emf1"), "EMF2xxxxxxxxxxxxxx");
  EXPECT_EQ(code_of([&] { io::load_matrix<double>(dir.file("bad.emf1")); }), Errc::Io);
}

TEST(Io, CsvFirstLineAndHeader) {
  TempDir dir("emf_io_csv");
  {
    io::CsvWriter w(dir.file("a.csv"), {"index", "lambda"}, "abc123");
    w.values(0, 0.1);
    w.values(std::size_t{1}, -2.5e-300);
  }
  std::ifstream in(dir.file("a.csv"));
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first, "# emf-csv v1 manifest=abc123");
  EXPECT_EQ(second, "index,lambda");
  const auto rows = io::read_csv(dir.file("a.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(std::stod(rows[1][1]), 0.1);
  EXPECT_EQ(std::stod(rows[2][1]), -2.5e-300);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -1e-17, 6.02214076e23, 0.0})
    EXPECT_EQ(std::stod(io::format_double(v)), v);
}

TEST(Io, ProfileCsv) {
  TempDir dir("emf_io_profile");
  write_text(dir.file("p.csv"), "0.5,0.5\n0.5,0.5\n");
  EXPECT_EQ(io::load_profile_csv(dir.file("p.csv")), Eigen::MatrixXd::Constant(2, 2, 0.5));
  write_text(dir.file("q.csv"), "0.5,x\n0.5,0.5\n");
  EXPECT_EQ(code_of([&] { io::load_profile_csv(dir.file("q.csv")); }), Errc::ConfigParse);
  write_text(dir.file("r.csv"), "0.5,0.5\n");
  EXPECT_EQ(code_of([&] { io::load_profile_csv(dir.file("r.csv")); }), Errc::ConfigParse);
}

TEST(Config, LoadsAllSections) {
  TempDir dir("emf_config_full");
  write_text(dir.file("flat.csv"), "0.25,0.25,0.25,0.25\n0.25,0.25,0.25,0.25\n0.25,0.25,0.25,0.25\n0.25,0.25,0.25,0.25\n");
  write_text(dir.file("run.ini"),
             "[ensemble]\nkind = bernoulli\nprofile = flat.csv\n"
             "[experiment]\nN = 4\nreplicas = 12\nindex_size = 2\nk = edge+1\nl = bulk-1\ns = 0.5\nseed = 9\n"
             "[exponents]\nepsilon = 0.3\n");
  const auto cfg = config::load(dir.file("run.ini"));
  EXPECT_EQ(cfg.spec.N, 4u);
  EXPECT_EQ(cfg.spec.replicas, 12u);
  EXPECT_EQ(cfg.spec.I_size(), 2u);
  EXPECT_EQ(cfg.spec.k(), 1u);
  EXPECT_EQ(cfg.spec.l(), 1u);
  EXPECT_DOUBLE_EQ(cfg.spec.s, 0.5);
  EXPECT_DOUBLE_EQ(cfg.spec.exponents.epsilon, 0.3);
  EXPECT_TRUE(cfg.spec.ensemble.profile.has_value());
  if (!std::getenv("EMF_SEED")) {
    EXPECT_EQ(cfg.spec.base_seed, 9u);
  }
}

TEST(Config, MissingKeyIsNamed) {
  TempDir dir("emf_config_missing");
  write_text(dir.file("run.ini"), "[ensemble]\nkind = goe\n[experiment]\nN = 10\n");
  try {
    config::load(dir.file("run.ini"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigParse);
    EXPECT_NE(std::string(e.what()).find("experiment.replicas"), std::string::npos);
  }
}

TEST(Config, BadValuesAreRejected) {
  TempDir dir("emf_config_bad");
  write_text(dir.file("a.ini"), "[ensemble]\nkind = goe\n[experiment]\nN = ten\nreplicas = 1\n");
  EXPECT_EQ(code_of([&] { config::load(dir.file("a.ini")); }), Errc::ConfigParse);
  write_text(dir.file("b.ini"), "[ensemble]\nkind = wishart\n[experiment]\nN = 10\nreplicas = 1\n");
  EXPECT_EQ(code_of([&] { config::load(dir.file("b.ini")); }), Errc::ConfigParse);
  write_text(dir.file("c.ini"), "[ensemble]\nkind = goe\n[experiment]\nN = 10\nreplicas = 1\nk = middle\n");
  EXPECT_EQ(code_of([&] { config::load(dir.file("c.ini")); }), Errc::ConfigParse);
  write_text(dir.file("d.ini"), "[ensemble]\nkind = goe\nprofile = missing.csv\n[experiment]\nN = 10\nreplicas = 1\n");
  EXPECT_EQ(code_of([&] { config::load(dir.file("d.ini")); }), Errc::ConfigParse);
}

TEST(Config, SelectorSyntax) {
  EXPECT_EQ(config::parse_selector("k", "bulk").resolve(10), 5u);
  EXPECT_EQ(config::parse_selector("k", "bulk+2").resolve(10), 7u);
  EXPECT_EQ(config::parse_selector("k", "bulk-3").resolve(10), 2u);
  EXPECT_EQ(config::parse_selector("k", "edge").resolve(10), 0u);
  EXPECT_EQ(config::parse_selector("k", "edge+4").resolve(10), 4u);
}
