#include "subcast/eof.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace subcast {

std::vector<double> EofBasis::physical_pattern(int which) const {
  const std::vector<double>& p = which == 1 ? pattern1 : pattern2;
  std::vector<double> out(p.size());
  for (std::size_t s = 0; s < p.size(); ++s) {
    out[s] = weights_sqrt[s] > 0.0 ? p[s] / weights_sqrt[s] : 0.0;
  }
  return out;
}

double EofBasis::project(const std::vector<double>& scaled_snapshot,
                         int which) const {
  const std::vector<double>& p = which == 1 ? pattern1 : pattern2;
  if (scaled_snapshot.size() != p.size()) {
    throw ConfigError("eof projection: axis mismatch");
  }
  double acc = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) acc += scaled_snapshot[s] * p[s];
  return acc;
}

void jacobi_eigh(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                 std::vector<double>& eigenvectors, double tol,
                 int max_sweeps) {
  if (n <= 0 || static_cast<int>(a.size()) != n * n) {
    throw ConfigError("jacobi_eigh: bad matrix shape");
  }
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) scale += a[i * n + j] * a[i * n + j];
  }
  scale = std::sqrt(scale);
  const double threshold = tol * std::max(scale, 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += 2.0 * a[p * n + q] * a[p * n + q];
    }
    if (std::sqrt(off) <= threshold) break;
    if (sweep == max_sweeps - 1) {
      throw NumericalError("jacobi_eigh: no convergence");
    }
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) <= threshold / n) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a[i * n + i] > a[j * n + j]; });
  eigenvalues.resize(n);
  eigenvectors.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int k = 0; k < n; ++k) {
    eigenvalues[k] = a[order[k] * n + order[k]];
    for (int i = 0; i < n; ++i) {
      eigenvectors[i * n + k] = v[i * n + order[k]];
    }
  }
}

EofBasis eof_pair(const std::vector<double>& data, int ntime, int nspace,
                  const std::vector<double>& weights) {
  if (ntime < 2) throw ConfigError("eof_pair: need at least 2 time samples");
  if (nspace < 2) throw NumericalError("eof_pair: degenerate covariance (rank < 2)");
  if (static_cast<int>(data.size()) != ntime * nspace ||
      static_cast<int>(weights.size()) != nspace) {
    throw ConfigError("eof_pair: shape mismatch");
  }

  EofBasis basis;
  basis.nspace = nspace;
  basis.weights_sqrt.resize(nspace);
  for (int s = 0; s < nspace; ++s) {
    if (!(weights[s] > 0.0)) throw ConfigError("eof_pair: non-positive weight");
    basis.weights_sqrt[s] = std::sqrt(weights[s]);
  }

  std::vector<double> scaled(data.size());
  for (int t = 0; t < ntime; ++t) {
    for (int s = 0; s < nspace; ++s) {
      scaled[t * nspace + s] = data[t * nspace + s] * basis.weights_sqrt[s];
    }
  }

  std::vector<double> eigvals, eigvecs;
  double total_variance = 0.0;

  if (nspace <= ntime) {
    // space x space covariance
    std::vector<double> cov(static_cast<std::size_t>(nspace) * nspace, 0.0);
    for (int t = 0; t < ntime; ++t) {
      const double* row = scaled.data() + static_cast<std::size_t>(t) * nspace;
      for (int i = 0; i < nspace; ++i) {
        for (int j = i; j < nspace; ++j) {
          cov[i * nspace + j] += row[i] * row[j];
        }
      }
    }
    const double denom = static_cast<double>(ntime - 1);
    for (int i = 0; i < nspace; ++i) {
      for (int j = i; j < nspace; ++j) {
        cov[i * nspace + j] /= denom;
        cov[j * nspace + i] = cov[i * nspace + j];
      }
    }
    jacobi_eigh(std::move(cov), nspace, eigvals, eigvecs);
    for (double ev : eigvals) total_variance += std::max(ev, 0.0);
    basis.pattern1.resize(nspace);
    basis.pattern2.resize(nspace);
    for (int s = 0; s < nspace; ++s) {
      basis.pattern1[s] = eigvecs[s * nspace + 0];
      basis.pattern2[s] = eigvecs[s * nspace + 1];
    }
    basis.eigenvalue1 = eigvals[0];
    basis.eigenvalue2 = eigvals[1];
  } else {
    // time x time Gram matrix; patterns recovered as X^T u.
    std::vector<double> gram(static_cast<std::size_t>(ntime) * ntime, 0.0);
    for (int t = 0; t < ntime; ++t) {
      for (int u = t; u < ntime; ++u) {
        double acc = 0.0;
        const double* rt = scaled.data() + static_cast<std::size_t>(t) * nspace;
        const double* ru = scaled.data() + static_cast<std::size_t>(u) * nspace;
        for (int s = 0; s < nspace; ++s) acc += rt[s] * ru[s];
        gram[t * ntime + u] = acc / static_cast<double>(ntime - 1);
        gram[u * ntime + t] = gram[t * ntime + u];
      }
    }
    jacobi_eigh(std::move(gram), ntime, eigvals, eigvecs);
    for (double ev : eigvals) total_variance += std::max(ev, 0.0);
    basis.eigenvalue1 = eigvals[0];
    basis.eigenvalue2 = eigvals[1];
    basis.pattern1.assign(nspace, 0.0);
    basis.pattern2.assign(nspace, 0.0);
    for (int t = 0; t < ntime; ++t) {
      const double u1 = eigvecs[t * ntime + 0];
      const double u2 = eigvecs[t * ntime + 1];
      const double* row = scaled.data() + static_cast<std::size_t>(t) * nspace;
      for (int s = 0; s < nspace; ++s) {
        basis.pattern1[s] += row[s] * u1;
        basis.pattern2[s] += row[s] * u2;
      }
    }
    for (auto* pat : {&basis.pattern1, &basis.pattern2}) {
      double norm = 0.0;
      for (double x : *pat) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (double& x : *pat) x /= norm;
      }
    }
  }

  if (total_variance > 0.0) {
    basis.explained1 = std::max(basis.eigenvalue1, 0.0) / total_variance;
    basis.explained2 = std::max(basis.eigenvalue2, 0.0) / total_variance;
  }

  // Sign convention 1: largest-|loading| component of pattern 1 positive.
  {
    int arg = 0;
    for (int s = 1; s < nspace; ++s) {
      if (std::abs(basis.pattern1[s]) > std::abs(basis.pattern1[arg])) arg = s;
    }
    if (basis.pattern1[arg] < 0.0) {
      for (double& x : basis.pattern1) x = -x;
    }
    arg = 0;
    for (int s = 1; s < nspace; ++s) {
      if (std::abs(basis.pattern2[s]) > std::abs(basis.pattern2[arg])) arg = s;
    }
    if (basis.pattern2[arg] < 0.0) {
      for (double& x : basis.pattern2) x = -x;
    }
  }

  // Sign convention 2: flip pattern 2 if the PC pair rotates backward, so a
  // propagating signal advances its phase angle forward in time.
  {
    double advance = 0.0;
    std::vector<double> snapshot(nspace);
    double prev1 = 0.0, prev2 = 0.0;
    for (int t = 0; t < ntime; ++t) {
      for (int s = 0; s < nspace; ++s) {
        snapshot[s] = scaled[t * nspace + s];
      }
      const double pc1 = basis.project(snapshot, 1);
      const double pc2 = basis.project(snapshot, 2);
      if (t > 0) advance += prev1 * pc2 - prev2 * pc1;  // cross product z term
      prev1 = pc1;
      prev2 = pc2;
    }
    if (advance < 0.0) {
      for (double& x : basis.pattern2) x = -x;
    }
  }

  return basis;
}

}  // namespace subcast
