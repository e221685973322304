#pragma once

// Grassmann algebra over four generator families (eta, xi, phi, psi) per
// site, Berezin integration, and Gaussian super-expectations.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "emf/core.hpp"
#include "emf/observables.hpp"

namespace emf::grassmann {

enum class Family : unsigned { eta = 0, xi = 1, phi = 2, psi = 3 };

inline constexpr std::size_t max_generators = 24;

/// Generator (family, site); site is 0-based. Global index 4 * site + family
/// defines the canonical order.
struct GeneratorIndex {
  Family family = Family::eta;
  std::size_t site = 0;

  unsigned global() const {
    const std::size_t g = 4 * site + static_cast<unsigned>(family);
    if (g >= max_generators) throw Error(Errc::GeneratorBudgetExceeded, "generator index beyond the 24-generator budget");
    return static_cast<unsigned>(g);
  }
};

using Mask = std::uint32_t;

/// Sign of the product m1 * m2 of two canonical monomials after reordering
/// into canonical order; 0 when they share a generator.
inline int wedge_sign(Mask a, Mask b) {
  if (a & b) return 0;
  unsigned swaps = 0;
  for (Mask r = b; r != 0; r &= r - 1) {
    const unsigned j = static_cast<unsigned>(std::countr_zero(r));
    swaps += static_cast<unsigned>(std::popcount(a >> (j + 1)));
  }
  return (swaps & 1u) ? -1 : 1;
}

class Element {
 public:
  using Terms = std::map<Mask, cplx>;

  Element() = default;
  static Element scalar(cplx c) {
    Element e;
    e.add(0, c);
    return e;
  }
  static Element generator(GeneratorIndex g, cplx c = 1.0) {
    Element e;
    e.add(Mask{1} << g.global(), c);
    return e;
  }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  cplx coefficient(Mask m) const {
    const auto it = terms_.find(m);
    return it == terms_.end() ? cplx(0.0) : it->second;
  }

  void add(Mask m, cplx c) {
    if (c == cplx(0.0)) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == cplx(0.0)) terms_.erase(it);
    }
  }

  bool even() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) { return std::popcount(t.first) % 2 == 0; });
  }

  Element& operator+=(const Element& o) {
    for (const auto& [m, c] : o.terms_) add(m, c);
    return *this;
  }
  Element& operator*=(cplx s) {
    if (s == cplx(0.0)) terms_.clear();
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }
  friend Element operator+(Element a, const Element& b) { return a += b; }
  friend Element operator-(Element a, Element b) { return a += (b *= -1.0); }
  friend Element operator*(Element a, cplx s) { return a *= s; }
  friend Element operator*(cplx s, Element a) { return a *= s; }

  /// Coefficientwise equality within tol.
  bool approx_equal(const Element& o, double tol) const {
    for (const auto& [m, c] : terms_)
      if (std::abs(c - o.coefficient(m)) > tol) return false;
    for (const auto& [m, c] : o.terms_)
      if (std::abs(c - coefficient(m)) > tol) return false;
    return true;
  }

 private:
  Terms terms_;
};

/// Product with the Koszul sign; terms sharing a generator vanish.
inline Element wedge(const Element& a, const Element& b) {
  Element out;
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) {
      const int s = wedge_sign(ma, mb);
      if (s != 0) out.add(ma | mb, static_cast<double>(s) * ca * cb);
    }
  return out;
}

/// <v>_family = sum_alpha v(alpha) * generator(family, alpha).
inline Element projection(const Eigen::VectorXd& v, Family family) {
  Element e;
  for (Eigen::Index a = 0; a < v.size(); ++a) e.add(Mask{1} << GeneratorIndex{family, static_cast<std::size_t>(a)}.global(), v[a]);
  return e;
}

inline Element projection(const Eigen::VectorXcd& v, Family family) {
  Element e;
  for (Eigen::Index a = 0; a < v.size(); ++a) e.add(Mask{1} << GeneratorIndex{family, static_cast<std::size_t>(a)}.global(), v[a]);
  return e;
}

/// sum_m a^m / m! for an even element without constant term.
inline Element grassmann_exp(const Element& a) {
  if (!a.even()) throw Error(Errc::OddDegreeInput, "exponential needs an even element");
  if (a.coefficient(0) != cplx(0.0)) throw Error(Errc::OddDegreeInput, "exponential needs a zero constant term");
  Element out = Element::scalar(1.0);
  Element power = Element::scalar(1.0);
  for (int m = 1; m <= static_cast<int>(max_generators); ++m) {
    power = wedge(power, a) * cplx(1.0 / m);
    if (power.is_zero()) break;
    out += power;
  }
  return out;
}

/// Sign of the permutation taking the canonical (ascending) order of the
/// generators to `ordering`.
inline int ordering_sign(const std::vector<unsigned>& ordering) {
  int inversions = 0;
  for (std::size_t i = 0; i < ordering.size(); ++i)
    for (std::size_t j = i + 1; j < ordering.size(); ++j)
      if (ordering[i] > ordering[j]) ++inversions;
  return inversions % 2 == 0 ? 1 : -1;
}

inline void validate_ordering(const std::vector<unsigned>& ordering) {
  std::vector<unsigned> sorted = ordering;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i) throw Error(Errc::IncompleteOrdering, "ordering must list every generator exactly once");
  if (sorted.size() > max_generators) throw Error(Errc::GeneratorBudgetExceeded, "too many generators");
}

/// Coefficient of the full monomial over the generators in `ordering`,
/// written in that order.
inline cplx berezin_integral(const Element& a, const std::vector<unsigned>& ordering) {
  validate_ordering(ordering);
  const Mask full = ordering.size() == 32 ? ~Mask{0} : ((Mask{1} << ordering.size()) - 1);
  return static_cast<double>(ordering_sign(ordering)) * a.coefficient(full);
}

// --- Gaussian super-expectation --------------------------------------------

struct Covariance {
  Eigen::MatrixXd delta;
  double C0 = 0.0;

  std::size_t n() const { return static_cast<std::size_t>(delta.rows()); }
};

/// Candidate integration orderings for n sites; the first one passing the
/// calibration is used.
inline std::vector<std::vector<unsigned>> candidate_orderings(std::size_t n) {
  std::vector<std::vector<unsigned>> out;
  const std::vector<std::vector<unsigned>> per_site = {{0, 1, 2, 3}, {1, 0, 3, 2}, {0, 1, 3, 2}, {1, 0, 2, 3}};
  for (const auto& fam : per_site) {
    std::vector<unsigned> site_major, family_major;
    for (std::size_t s = 0; s < n; ++s)
      for (unsigned f : fam) site_major.push_back(static_cast<unsigned>(4 * s + f));
    for (unsigned f : fam)
      for (std::size_t s = 0; s < n; ++s) family_major.push_back(static_cast<unsigned>(4 * s + f));
    out.push_back(site_major);
    out.push_back(family_major);
    std::reverse(site_major.begin(), site_major.end());
    out.push_back(site_major);
  }
  return out;
}

/// Super-expectation with a precomputed Gaussian weight.
class GaussianMeasure {
 public:
  explicit GaussianMeasure(const Covariance& cov) : cov_(cov) {
    const auto n = cov.n();
    if (n == 0 || 4 * n > max_generators) throw Error(Errc::GeneratorBudgetExceeded, "super-expectations need 1 <= N <= 6");
    if (cov.delta.cols() != cov.delta.rows()) throw Error(Errc::InvalidArgument, "covariance must be square");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cov.delta);
    if (!lu.isInvertible()) throw Error(Errc::SingularCovariance, "covariance matrix is singular");
    const Eigen::MatrixXd inv = lu.inverse();
    det_inverse_ = inv.determinant();
    if (!std::isfinite(det_inverse_) || det_inverse_ == 0.0) throw Error(Errc::SingularCovariance, "covariance matrix is singular");
    Element exponent;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        exponent += wedge(Element::generator({Family::eta, i}), Element::generator({Family::xi, j}, inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
      exponent += wedge(Element::generator({Family::phi, i}), Element::generator({Family::psi, i}));
    }
    weight_ = grassmann_exp(exponent);
    full_ = (Mask{1} << (4 * n)) - 1;
    ordering_ = calibrated_ordering(n);
    ordering_sign_ = ordering_sign(ordering_);
  }

  const std::vector<unsigned>& ordering() const { return ordering_; }
  double condition_number() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov_.delta);
    const auto& s = svd.singularValues();
    return s[0] / s[s.size() - 1];
  }

  /// (1 / det(Delta^{-1})) * integral of f * weight, using only the top
  /// coefficient of the product.
  cplx expectation(const Element& f) const {
    cplx top = 0.0;
    for (const auto& [m, c] : f.terms()) {
      const Mask rest = full_ & ~m;
      if ((m & ~full_) != 0) throw Error(Errc::GeneratorBudgetExceeded, "element uses generators beyond N sites");
      const cplx w = weight_.coefficient(rest);
      if (w == cplx(0.0)) continue;
      top += static_cast<double>(wedge_sign(m, rest)) * c * w;
    }
    return static_cast<double>(ordering_sign_) * top / det_inverse_;
  }

 private:
  static std::vector<unsigned> calibrated_ordering(std::size_t n);

  Covariance cov_;
  Element weight_;
  double det_inverse_ = 1.0;
  Mask full_ = 0;
  std::vector<unsigned> ordering_;
  int ordering_sign_ = 1;
};

/// (eta_i + i sqrt(C0) phi_i)
inline Element shifted_eta(std::size_t i, double C0) {
  return Element::generator({Family::eta, i}) + Element::generator({Family::phi, i}, cplx(0.0, std::sqrt(std::abs(C0))));
}
/// (xi_j + i sqrt(C0) psi_j)
inline Element shifted_xi(std::size_t j, double C0) {
  return Element::generator({Family::xi, j}) + Element::generator({Family::psi, j}, cplx(0.0, std::sqrt(std::abs(C0))));
}

/// Picks the first candidate ordering under which E[1] = 1 and
/// E[(eta_1 + i sqrt(C0) phi_1)(xi_1 + i sqrt(C0) psi_1)] = Delta_11 - C0
/// on a fixed reference covariance. Cached per n.
inline std::vector<unsigned> GaussianMeasure::calibrated_ordering(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::vector<unsigned>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(n); it != cache.end()) return it->second;

  Eigen::MatrixXd ref = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * 2.0;
  for (Eigen::Index i = 0; i + 1 < ref.rows(); ++i) ref(i, i + 1) = ref(i + 1, i) = 0.5;
  const double C0 = 0.3;
  const Eigen::MatrixXd inv = ref.inverse();
  Element exponent;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      exponent += wedge(Element::generator({Family::eta, i}), Element::generator({Family::xi, j}, inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    exponent += wedge(Element::generator({Family::phi, i}), Element::generator({Family::psi, i}));
  }
  const Element weight = grassmann_exp(exponent);
  const double det_inv = inv.determinant();
  const Element pair = wedge(shifted_eta(0, C0), shifted_xi(0, C0));
  for (const auto& ordering : candidate_orderings(n)) {
    const cplx one = berezin_integral(weight, ordering) / det_inv;
    const cplx two = berezin_integral(wedge(pair, weight), ordering) / det_inv;
    if (std::abs(one - 1.0) < 1e-12 && std::abs(two - (ref(0, 0) - C0)) < 1e-12) {
      cache[n] = ordering;
      return ordering;
    }
  }
  throw Error(Errc::ConvergenceFailure, "no candidate integration ordering satisfies the calibration");
}

inline cplx gaussian_expectation(const Element& f, const Covariance& cov) { return GaussianMeasure(cov).expectation(f); }

struct CheckReport {
  std::string name;
  cplx lhs = 0.0;
  cplx rhs = 0.0;
  double delta = 0.0;
  bool pass = false;
};

/// E[prod_k (eta_{i_k} + i sqrt(C0) phi_{i_k})(xi_{j_k} + i sqrt(C0) psi_{j_k})]
/// against det((Delta - C0 Id)_{i_k j_l}).
inline CheckReport wick_check(const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const GaussianMeasure& measure,
                              const Covariance& cov, double tol = 1e-10) {
  const auto m = static_cast<Eigen::Index>(pairs.size());
  Element f = Element::scalar(1.0);
  for (const auto& [i, j] : pairs) f = wedge(f, wedge(shifted_eta(i, cov.C0), shifted_xi(j, cov.C0)));
  Eigen::MatrixXd M(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto i = static_cast<Eigen::Index>(pairs[static_cast<std::size_t>(a)].first);
      const auto j = static_cast<Eigen::Index>(pairs[static_cast<std::size_t>(b)].second);
      M(a, b) = cov.delta(i, j) - (i == j ? cov.C0 : 0.0);
    }
  CheckReport r;
  r.name = "wick";
  r.lhs = measure.expectation(f);
  r.rhs = determinant(M);
  r.delta = std::abs(r.lhs - r.rhs);
  r.pass = r.delta <= tol * std::max(1.0, std::abs(r.rhs));
  return r;
}

inline CheckReport wick_check(const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const Covariance& cov,
                              double tol = 1e-10) {
  return wick_check(pairs, GaussianMeasure(cov), cov, tol);
}

/// Super-expectation of prod_i <u_{k_i}>_{eta + i sqrt(C0) phi} <u_{k_i}>_{xi + i sqrt(C0) psi}
/// with Delta = sum_alpha q_alpha q_alpha^T, against det P(k). A singular Delta
/// (fewer directions than sites) is handled by evaluating at Delta + eps Id for
/// n + 1 values of eps and extrapolating the polynomial in eps to 0.
inline CheckReport fermionic_construction_check(const Eigen::MatrixXd& u, const ProjectionFamily& fam,
                                                const std::vector<std::size_t>& k, double tol = 1e-9) {
  const auto n = static_cast<std::size_t>(u.rows());
  if (n == 0 || n > 4) throw Error(Errc::InvalidArgument, "construction check needs N <= 4");
  if (k.empty() || k.size() > 2) throw Error(Errc::InvalidArgument, "construction check needs n <= 2");
  const double C0 = fam.C0;
  const double s = std::sqrt(std::abs(C0));
  Element f = Element::scalar(1.0);
  for (auto ki : k) {
    const Eigen::VectorXd v = u.col(static_cast<Eigen::Index>(ki));
    const Element a = projection(v, Family::eta) + projection(v, Family::phi) * cplx(0.0, s);
    const Element b = projection(v, Family::xi) + projection(v, Family::psi) * cplx(0.0, s);
    f = wedge(f, wedge(a, b));
  }
  const Eigen::MatrixXd delta = fam.covariance(n);

  CheckReport r;
  r.name = "fermionic_construction";
  Eigen::FullPivLU<Eigen::MatrixXd> lu(delta);
  lu.setThreshold(1e-10);
  if (lu.isInvertible()) {
    r.lhs = GaussianMeasure({delta, C0}).expectation(f);
  } else {
    // Polynomial of degree <= n in eps; Lagrange extrapolation from eps = 1..n+1.
    const std::size_t points = n + 1;
    const double scale = std::max(1.0, delta.cwiseAbs().maxCoeff());
    r.lhs = 0.0;
    for (std::size_t a = 0; a < points; ++a) {
      const double ea = scale * static_cast<double>(a + 1);
      double weight = 1.0;
      for (std::size_t b = 0; b < points; ++b)
        if (b != a) {
          const double eb = scale * static_cast<double>(b + 1);
          weight *= (0.0 - eb) / (ea - eb);
        }
      const Eigen::MatrixXd shifted = delta + ea * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      r.lhs += weight * GaussianMeasure({shifted, C0}).expectation(f);
    }
  }
  const auto ov = overlaps<double>(u, fam, k);
  r.rhs = fermionic_value(fluctuation_matrix(ov, k));
  r.delta = std::abs(r.lhs - r.rhs);
  r.pass = r.delta <= tol * std::max(1.0, std::abs(r.rhs));
  return r;
}

}  // namespace emf::grassmann
