#pragma once

// CSV, JSON and the "EMF1" binary container for matrices and eigenvalue paths.
//
// EMF1 layout (little-endian):
//   magic "EMF1", uint64 n, uint8 kind (0 real symmetric, 1 complex Hermitian, 2 path)
//   kind 0/1: n*n entries, column-major, double (complex stored as re, im)
//   kind 2:   uint64 count, uint64 noise_seed, count times, then count*n eigenvalues

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "emf/core.hpp"
#include "emf/dbm.hpp"
#include "emf/ensembles.hpp"

namespace emf::io {

using json = nlohmann::json;

/// Version tag written into the first line of every CSV file.
inline constexpr int csv_schema_version = 1;

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header, const std::string& manifest_hash = {})
      : out_(path) {
    if (!out_) throw Error(Errc::Io, "cannot open " + path + " for writing");
    out_ << "# emf-csv v" << csv_schema_version;
    if (!manifest_hash.empty()) out_ << " manifest=" << manifest_hash;
    out_ << "\n";
    write_fields(header);
  }

  void row(const std::vector<std::string>& fields) { write_fields(fields); }

  template <class... Ts>
  void values(const Ts&... v) {
    std::vector<std::string> fields;
    (fields.push_back(to_field(v)), ...);
    write_fields(fields);
  }

 private:
  template <class T>
  static std::string to_field(const T& v) {
    if constexpr (std::is_floating_point_v<T>) return format_double(static_cast<double>(v));
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else return std::string(v);
  }

  void write_fields(const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) out_ << (i ? "," : "") << f[i];
    out_ << "\n";
  }

  std::ofstream out_;
};

/// Reads a CSV file, skipping '#' lines. The first remaining line is the header.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

/// Variance profile from a headerless numeric CSV (n rows of n values).
inline Eigen::MatrixXd load_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open profile " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
      try {
        r.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw Error(Errc::ConfigParse, "non-numeric profile entry '" + f + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw Error(Errc::ConfigParse, "profile must be square");
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return s;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

// --- EMF1 ------------------------------------------------------------------

namespace detail {
template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(Errc::Io, "truncated EMF1 stream");
  return v;
}
inline void header(std::ostream& os, std::uint64_t n, std::uint8_t kind) {
  os.write("EMF1", 4);
  put(os, n);
  put(os, kind);
}
inline std::pair<std::uint64_t, std::uint8_t> read_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EMF1") throw Error(Errc::Io, "not an EMF1 container");
  const auto n = get<std::uint64_t>(is);
  const auto kind = get<std::uint8_t>(is);
  return {n, kind};
}
}  // namespace detail

template <class Scalar>
void write_matrix(std::ostream& os, const Matrix<Scalar>& m) {
  detail::header(os, static_cast<std::uint64_t>(m.rows()), is_complex_v<Scalar> ? 1 : 0);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if constexpr (is_complex_v<Scalar>) {
        detail::put(os, m(i, j).real());
        detail::put(os, m(i, j).imag());
      } else {
        detail::put(os, m(i, j));
      }
    }
}

template <class Scalar>
Matrix<Scalar> read_matrix(std::istream& is) {
  const auto [n, kind] = detail::read_header(is);
  if (kind != (is_complex_v<Scalar> ? 1 : 0)) throw Error(Errc::Io, "EMF1 kind does not match the requested scalar type");
  Matrix<Scalar> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if constexpr (is_complex_v<Scalar>) {
        const double re = detail::get<double>(is);
        m(i, j) = Scalar(re, detail::get<double>(is));
      } else {
        m(i, j) = detail::get<double>(is);
      }
    }
  return m;
}

inline void write_path(std::ostream& os, const EigenPath& p) {
  detail::header(os, static_cast<std::uint64_t>(p.n()), 2);
  detail::put(os, static_cast<std::uint64_t>(p.times.size()));
  detail::put(os, p.noise_seed);
  for (double t : p.times) detail::put(os, t);
  for (const auto& l : p.lambdas_at)
    for (Eigen::Index i = 0; i < l.size(); ++i) detail::put(os, l[i]);
}

inline EigenPath read_path(std::istream& is) {
  const auto [n, kind] = detail::read_header(is);
  if (kind != 2) throw Error(Errc::Io, "EMF1 container does not hold a path");
  EigenPath p;
  const auto count = detail::get<std::uint64_t>(is);
  p.noise_seed = detail::get<std::uint64_t>(is);
  p.times.resize(count);
  for (auto& t : p.times) t = detail::get<double>(is);
  p.lambdas_at.assign(count, Eigen::VectorXd(static_cast<Eigen::Index>(n)));
  for (auto& l : p.lambdas_at)
    for (Eigen::Index i = 0; i < l.size(); ++i) l[i] = detail::get<double>(is);
  return p;
}

template <class Scalar>
void save_matrix(const std::string& path, const Matrix<Scalar>& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path + " for writing");
  write_matrix(os, m);
}

template <class Scalar>
Matrix<Scalar> load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::Io, "cannot open " + path);
  return read_matrix<Scalar>(is);
}

inline void save_path(const std::string& path, const EigenPath& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path + " for writing");
  write_path(os, p);
}

inline EigenPath load_path(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::Io, "cannot open " + path);
  return read_path(is);
}

/// Reads the kind byte of an EMF1 file without consuming the payload.
inline std::uint8_t peek_kind(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::Io, "cannot open " + path);
  return detail::read_header(is).second;
}

}  // namespace emf::io
