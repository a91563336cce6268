#pragma once

#include <vector>

#include "subcast/errors.hpp"

namespace subcast {

// Leading pair of empirical orthogonal functions of an anomaly matrix.
// Patterns are unit-norm in sqrt(weight)-scaled space; principal components
// are the projections of the scaled data onto the patterns.
struct EofBasis {
  int nspace = 0;
  std::vector<double> pattern1, pattern2;  // weighted space, unit norm
  std::vector<double> weights_sqrt;        // scaling applied to the data
  double eigenvalue1 = 0.0, eigenvalue2 = 0.0;
  double explained1 = 0.0, explained2 = 0.0;  // fractions of total variance

  // Pattern divided by sqrt(weights): loadings in physical units.
  std::vector<double> physical_pattern(int which) const;
  // Projection of one sqrt(weight)-scaled snapshot.
  double project(const std::vector<double>& scaled_snapshot, int which) const;
};

// Cyclic Jacobi eigensolver for a symmetric matrix (row-major, n x n).
// Deterministic sweep order (p < q row-major); converged when every
// off-diagonal magnitude is <= tol * frobenius scale. Eigenpairs are returned
// in descending eigenvalue order.
void jacobi_eigh(std::vector<double> matrix, int n,
                 std::vector<double>& eigenvalues,
                 std::vector<double>& eigenvectors,  // column k = vector k
                 double tol = 1e-10, int max_sweeps = 100);

// Two leading EOFs of data[time][space] after sqrt(weight) column scaling.
// Decomposes the smaller of the two Gram matrices. Sign conventions:
//   - the largest-|loading| component of pattern 1 is positive;
//   - pattern 2 is flipped, if needed, so the PC pair rotates forward
//     (phase angle atan2(pc2, pc1) advancing in time).
EofBasis eof_pair(const std::vector<double>& data, int ntime, int nspace,
                  const std::vector<double>& weights);

}  // namespace subcast
