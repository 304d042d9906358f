#pragma once

#include <Eigen/Dense>

namespace gadoa {

struct HermitianEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors; // orthonormal columns, matching `values`
};

/// Eigenpairs of a real symmetric matrix by cyclic Jacobi rotations.
/// Values are returned in ascending order.
void jacobi_symmetric(const Eigen::MatrixXd& a, Eigen::VectorXd& values,
                      Eigen::MatrixXd& vectors);

/// Hermitian eigendecomposition through the real symmetric embedding
/// [[Re H, -Im H], [Im H, Re H]]. Each eigenvalue appears twice there; one
/// complex vector per pair is recovered by pivoted Gram-Schmidt inside each
/// cluster of equal eigenvalues. Throws kNumeric for non-Hermitian input
/// (tolerance 1e-9 relative) or if the sweeps fail to converge.
HermitianEigen eigh(const Eigen::MatrixXcd& h);

}  // namespace gadoa
