#include "gadoa/eigh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gadoa/error.hpp"

namespace gadoa {

void jacobi_symmetric(const Eigen::MatrixXd& input, Eigen::VectorXd& values,
                      Eigen::MatrixXd& vectors) {
  const Eigen::Index n = input.rows();
  Eigen::MatrixXd a = input;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);

  constexpr int kMaxSweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * scale) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        // Rotation angle that zeroes a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw Error(ErrorKind::kNumeric, "Jacobi eigensolver did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  values.resize(n);
  vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
}

HermitianEigen eigh(const Eigen::MatrixXcd& h) {
  const Eigen::Index m = h.rows();
  if (m == 0 || h.cols() != m) throw Error(ErrorKind::kNumeric, "eigh: matrix must be square");
  const double norm = std::max(h.norm(), 1e-300);
  if ((h - h.adjoint()).norm() > 1e-9 * norm) {
    throw Error(ErrorKind::kNumeric, "eigh: matrix is not Hermitian");
  }
  const Eigen::MatrixXcd herm = 0.5 * (h + h.adjoint());
  Eigen::MatrixXd embedded(2 * m, 2 * m);
  embedded << herm.real(), -herm.imag(), herm.imag(), herm.real();

  Eigen::VectorXd real_values;
  Eigen::MatrixXd real_vectors;
  jacobi_symmetric(embedded, real_values, real_vectors);

  const double tol = 1e-10 * std::max(1.0, real_values.cwiseAbs().maxCoeff());
  std::vector<Eigen::VectorXcd> picked;
  picked.reserve(static_cast<std::size_t>(m));

  Eigen::Index start = 0;
  while (start < 2 * m) {
    Eigen::Index end = start + 1;
    while (end < 2 * m && real_values(end) - real_values(end - 1) <= tol) ++end;
    const auto want = static_cast<std::size_t>(end / 2);

    std::vector<Eigen::VectorXcd> candidates;
    for (Eigen::Index i = start; i < end; ++i) {
      candidates.emplace_back(real_vectors.col(i).head(m).cast<std::complex<double>>() +
                              std::complex<double>(0.0, 1.0) *
                                  real_vectors.col(i).tail(m).cast<std::complex<double>>());
    }
    while (picked.size() < want) {
      std::size_t best = 0;
      double best_norm = -1.0;
      Eigen::VectorXcd best_residual;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        Eigen::VectorXcd r = candidates[c];
        for (const auto& p : picked) r -= p * p.dot(r);
        const double rn = r.norm();
        if (rn > best_norm) {
          best_norm = rn;
          best = c;
          best_residual = std::move(r);
        }
      }
      if (best_norm <= 1e-8) throw Error(ErrorKind::kNumeric, "eigh: eigenvector recovery failed");
      picked.push_back(best_residual / best_norm);
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
    }
    start = end;
  }

  std::vector<double> rayleigh(picked.size());
  for (std::size_t i = 0; i < picked.size(); ++i) {
    rayleigh[i] = picked[i].dot(herm * picked[i]).real();
  }
  std::vector<std::size_t> order(picked.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return rayleigh[i] < rayleigh[j]; });

  HermitianEigen out;
  out.values.resize(m);
  out.vectors.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.values(i) = rayleigh[order[static_cast<std::size_t>(i)]];
    out.vectors.col(i) = picked[order[static_cast<std::size_t>(i)]];
  }
  return out;
}

}  // namespace gadoa
