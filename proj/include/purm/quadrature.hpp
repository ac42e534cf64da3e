#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace purm {

// Gauss-Hermite rule for the weight exp(-x^2):
//   integral f(x) exp(-x^2) dx  ~=  sum_i weights[i] * f(nodes[i])
// Nodes ascend; weights sum to sqrt(pi).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Eigenvalues of a symmetric tridiagonal matrix by the implicit-shift QL
// algorithm. d holds the diagonal (replaced by eigenvalues, unsorted),
// e the subdiagonal in e[0..n-2].
inline void ql_implicit(std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(d.size());
  if (n == 1) return;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == 60) {
          throw std::runtime_error("ql_implicit: too many iterations");
        }
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i = m - 1;
        for (; i >= l; --i) {
          const double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

// Evaluates the orthonormal Hermite polynomial p_n (weight exp(-x^2)) and
// p_{n-1} at x via the three-term recurrence.
inline void hermite_pair(int n, double x, double& pn, double& pn1) {
  const double pi_m4 = 0.7511255444649425;  // pi^(-1/4)
  double p1 = pi_m4;
  double p2 = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = x * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
  }
  pn = p1;
  pn1 = p2;
}

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix (zero
// diagonal, subdiagonal sqrt(j/2)). Each eigenvalue is then polished with
// Newton steps on the recurrence, which also yields the weight as
// 2 / p_n'(x)^2. Symmetry is enforced exactly by mirroring the positive
// half.
inline GaussHermiteRule make_gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");

  std::vector<double> d(n, 0.0), e(n, 0.0);
  for (int j = 1; j < n; ++j) e[j] = std::sqrt(j / 2.0);  // shifted by ql_implicit
  ql_implicit(d, e);
  std::sort(d.begin(), d.end());

  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  for (int i = n - (n / 2); i < n; ++i) {
    double z = 0.5 * (d[i] - d[n - 1 - i]);  // symmetrized positive root
    double pn = 0.0, pn1 = 0.0;
    for (int it = 0; it < 8; ++it) {
      hermite_pair(n, z, pn, pn1);
      const double dz = pn / (std::sqrt(2.0 * n) * pn1);
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    hermite_pair(n, z, pn, pn1);
    const double pp = std::sqrt(2.0 * n) * pn1;
    const double w = 2.0 / (pp * pp);
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    const int mid = n / 2;
    double pn = 0.0, pn1 = 0.0;
    hermite_pair(n, 0.0, pn, pn1);
    const double pp = std::sqrt(2.0 * n) * pn1;
    rule.nodes[mid] = 0.0;
    rule.weights[mid] = 2.0 / (pp * pp);
  }
  return rule;
}

}  // namespace detail

// Cached rule lookup. Map nodes are address-stable, so returned references
// survive later insertions.
inline const GaussHermiteRule& gauss_hermite(int n) {
  static std::mutex mu;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_hermite(n)).first;
  return it->second;
}

namespace detail {

template <typename F>
double simpson_step(F&& f, double a, double fa, double b, double fb, double fm,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;  // Richardson correction
  }
  return simpson_step(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature with Richardson extrapolation.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol,
                        int max_depth = 50) {
  if (!(a < b)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, fa, b, fb, fm, whole, tol, max_depth);
}

// Integrates f over [a, b], splitting first at the given interior breakpoints
// (useful when f has a localized feature such as a sigmoid knee).
template <typename F>
double adaptive_simpson_split(F&& f, double a, double b,
                              const std::vector<double>& breakpoints,
                              double tol_per_piece, int max_depth = 50) {
  std::vector<double> pts;
  pts.push_back(a);
  for (double p : breakpoints) {
    if (p > a && p < b) pts.push_back(p);
  }
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1] > pts[i]) {
      total += adaptive_simpson(f, pts[i], pts[i + 1], tol_per_piece, max_depth);
    }
  }
  return total;
}

}  // namespace purm
