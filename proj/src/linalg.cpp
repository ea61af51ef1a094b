// Dense/sparse symmetric kernels.  The dense eigensolver wraps LAPACK's
// divide-and-conquer routine; the generalized max-eigenvalue routine follows
// the whitening construction literally (eigendecompose B, cut the null space,
// verify A vanishes there, reduce); the Lanczos runs in the B inner product
// with full reorthogonalization so it stays reliable on stiff audit spectra.

#include "hfem/linalg.hpp"

#include <lapacke.h>

#include <cmath>
#include <random>
#include <stdexcept>

namespace hfem {

namespace {

// Reduced dimensions up to this order are eigendecomposed densely; above it
// the whitened operator is only applied implicitly (Lanczos).
constexpr int kDenseReducedCutoff = 2600;

void require_finite(const Eigen::MatrixXd& M, const char* who) {
  if (!M.allFinite())
    throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

}  // namespace

//------------------------------------------------------------------------------
// Containers
//------------------------------------------------------------------------------

SymmetricDense::SymmetricDense(int n) : n_(n) {
  if (n < 0) throw std::invalid_argument("SymmetricDense: negative order");
  packed_ = Eigen::VectorXd::Zero(static_cast<std::ptrdiff_t>(n) * (n + 1) / 2);
}

SymmetricDense SymmetricDense::from_full(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols())
    throw std::invalid_argument("SymmetricDense: non-square input");
  require_finite(M, "SymmetricDense");
  double scale = M.cwiseAbs().maxCoeff();
  double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale + 1e-300)
    throw std::invalid_argument("SymmetricDense: input not symmetric");
  SymmetricDense out(static_cast<int>(M.rows()));
  for (int j = 0; j < out.n_; ++j)
    for (int i = j; i < out.n_; ++i)
      out.at(i, j) = 0.5 * (M(i, j) + M(j, i));
  return out;
}

Eigen::MatrixXd SymmetricDense::full() const {
  Eigen::MatrixXd M(n_, n_);
  for (int j = 0; j < n_; ++j)
    for (int i = j; i < n_; ++i) M(i, j) = M(j, i) = at(i, j);
  return M;
}

SparseSymmetric SparseSymmetric::from_triplets(
    int n, const std::vector<Eigen::Triplet<double>>& triplets) {
  std::vector<Eigen::Triplet<double>> lower;
  lower.reserve(triplets.size());
  for (const auto& t : triplets) {
    int i = t.row(), j = t.col();
    if (i < j) std::swap(i, j);
    lower.emplace_back(i, j, t.value());
  }
  SparseSymmetric out;
  out.lower_.resize(n, n);
  out.lower_.setFromTriplets(lower.begin(), lower.end());
  out.lower_.makeCompressed();
  return out;
}

Eigen::VectorXd SparseSymmetric::apply(const Eigen::VectorXd& x) const {
  return lower_.selfadjointView<Eigen::Lower>() * x;
}

//------------------------------------------------------------------------------
// Dense eigensolver
//------------------------------------------------------------------------------

SymEig sym_eig(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("sym_eig: non-square");
  require_finite(A, "sym_eig");
  int n = static_cast<int>(A.rows());
  SymEig result;
  result.values.resize(n);
  result.vectors = 0.5 * (A + A.transpose());
  if (n == 0) return result;
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                   result.vectors.data(), n,
                                   result.values.data());
  if (info != 0)
    throw std::runtime_error("sym_eig: LAPACK dsyevd failed, info = " +
                             std::to_string(info));
  return result;
}

SymEig sym_eig(const SymmetricDense& A) { return sym_eig(A.full()); }

//------------------------------------------------------------------------------
// Generalized max eigenvalue
//------------------------------------------------------------------------------

GenEigResult gen_eig_max_reduced(const Eigen::MatrixXd& A, const SymEig& eig_b,
                                 double null_tol) {
  int n = static_cast<int>(A.rows());
  GenEigResult result;
  double scale_a = 0.0;
  for (int i = 0; i < n; ++i) scale_a = std::max(scale_a, std::abs(A(i, i)));

  double lam_b_max = (n > 0) ? std::max(eig_b.values[n - 1], 0.0) : 0.0;
  if (n > 0 && eig_b.values[0] < -null_tol * lam_b_max - 1e-300)
    throw std::runtime_error("gen_eig_max: B indefinite beyond tolerance");

  double cut = null_tol * lam_b_max;
  int r = 0;
  for (int i = 0; i < n; ++i)
    if (eig_b.values[i] > cut) ++r;
  result.b_rank = r;
  int null_dim = n - r;

  // Null-space audit: A must carry no energy on null(B), otherwise the
  // quotient sup x^T A x / x^T B x is genuinely unbounded and the offending
  // direction is the counterexample.
  if (null_dim > 0 && scale_a > 0.0) {
    Eigen::MatrixXd Z = eig_b.vectors.leftCols(null_dim);
    Eigen::MatrixXd E = Z.transpose() * A * Z;
    SymEig eig_e = sym_eig(E);
    if (eig_e.values[0] < -10.0 * null_tol * scale_a)
      throw std::runtime_error("gen_eig_max: A indefinite beyond tolerance");
    result.null_energy = std::max(eig_e.values[null_dim - 1], 0.0) / scale_a;
    if (result.null_energy > null_tol) {
      result.unbounded = true;
      result.witness = Z * eig_e.vectors.col(null_dim - 1);
      return result;
    }
  }

  if (r == 0 || scale_a == 0.0) {
    // B (or A) vanishes; the quotient is identically zero on range(B).
    result.lambda = 0.0;
    result.witness = Eigen::VectorXd::Zero(n);
    return result;
  }

  // Whiten: W = Q_r diag(lambda_r^{-1/2}); the reduced operator W^T A W is
  // symmetric PSD and its top eigenpair solves the pencil.
  Eigen::VectorXd inv_sqrt =
      eig_b.values.tail(r).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd W = eig_b.vectors.rightCols(r) * inv_sqrt.asDiagonal();

  if (r <= kDenseReducedCutoff) {
    Eigen::MatrixXd At = W.transpose() * (A * W);
    At = 0.5 * (At + At.transpose()).eval();
    SymEig eig_at = sym_eig(At);
    double top = eig_at.values[r - 1];
    if (eig_at.values[0] < -1e-7 * std::max(std::abs(top), 1.0) - 1e-300)
      throw std::runtime_error("gen_eig_max: A indefinite beyond tolerance");
    result.lambda = std::max(top, 0.0);
    result.witness = W * eig_at.vectors.col(r - 1);
    return result;
  }

  // Large reduced block: top eigenpair of the implicit operator.
  ApplyFn apply_reduced = [&](const Eigen::VectorXd& y) {
    return Eigen::VectorXd(W.transpose() * (A * (W * y)));
  };
  ApplyFn identity = [](const Eigen::VectorXd& y) { return y; };
  LanczosResult lan =
      lanczos_gen_eig_max(apply_reduced, identity, identity, r, 700, 1e-10);
  if (!lan.converged) {
    // Fallback: pay for the dense reduction after all.
    Eigen::MatrixXd At = W.transpose() * (A * W);
    At = 0.5 * (At + At.transpose()).eval();
    SymEig eig_at = sym_eig(At);
    result.lambda = std::max(eig_at.values[r - 1], 0.0);
    result.witness = W * eig_at.vectors.col(r - 1);
    return result;
  }
  result.lambda = std::max(lan.lambda, 0.0);
  result.witness = W * lan.witness;
  return result;
}

GenEigResult gen_eig_max(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         double null_tol) {
  if (A.rows() != B.rows() || A.rows() != A.cols() || B.rows() != B.cols())
    throw std::invalid_argument("gen_eig_max: size mismatch");
  require_finite(A, "gen_eig_max");
  require_finite(B, "gen_eig_max");
  SymEig eig_b = sym_eig(B);
  return gen_eig_max_reduced(0.5 * (A + A.transpose()), eig_b, null_tol);
}

GenEigResult gen_eig_max(const SymmetricDense& A, const SymmetricDense& B,
                         double null_tol) {
  return gen_eig_max(A.full(), B.full(), null_tol);
}

//------------------------------------------------------------------------------
// Lanczos and power iteration
//------------------------------------------------------------------------------

Eigen::VectorXd deterministic_unit_vector(int n, unsigned salt) {
  std::mt19937_64 rng(0x9E3779B97F4A7C15ULL ^
                      (0xBF58476D1CE4E5B9ULL * (salt + 1)));
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    // Top 53 bits -> [0,1); affine map to [-1,1).  Avoids distribution
    // classes whose output is implementation-defined.
    double u = static_cast<double>(rng() >> 11) * 0x1p-53;
    v[i] = 2.0 * u - 1.0;
  }
  double norm = v.norm();
  if (norm == 0.0) v[0] = 1.0, norm = 1.0;
  return v / norm;
}

LanczosResult lanczos_gen_eig_max(const ApplyFn& apply_A,
                                  const ApplyFn& apply_Binv,
                                  const ApplyFn& apply_B, int n, int max_iter,
                                  double tol) {
  LanczosResult result;
  if (n <= 0) return result;
  max_iter = std::min(max_iter, n);

  Eigen::MatrixXd V(n, max_iter + 1);  // B-orthonormal basis
  Eigen::MatrixXd U(n, max_iter + 1);  // U = B V
  std::vector<double> alpha, beta;

  Eigen::VectorXd v = deterministic_unit_vector(n, 1);
  Eigen::VectorXd u = apply_B(v);
  double nb = std::sqrt(std::max(v.dot(u), 0.0));
  if (nb == 0.0) return result;  // B vanishes on the start vector
  V.col(0) = v / nb;
  U.col(0) = u / nb;

  auto solve_tridiag = [&](int m, double& theta, Eigen::VectorXd& s) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i + 1, i) = T(i, i + 1) = beta[i];
    }
    SymEig eig_t = sym_eig(T);
    theta = eig_t.values[m - 1];
    s = eig_t.vectors.col(m - 1);
  };

  int j = 0;
  for (; j < max_iter; ++j) {
    Eigen::VectorXd z = apply_A(V.col(j));
    Eigen::VectorXd w = apply_Binv(z);
    double a = V.col(j).dot(z);
    alpha.push_back(a);
    w -= a * V.col(j);
    if (j > 0) w -= beta[j - 1] * V.col(j - 1);
    // Full reorthogonalization, two passes, against the B inner product.
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd proj =
          U.leftCols(j + 1).transpose() * w;  // <w, v_i>_B
      w -= V.leftCols(j + 1) * proj;
    }
    Eigen::VectorXd bw = apply_B(w);
    double b = std::sqrt(std::max(w.dot(bw), 0.0));
    double alpha_scale = std::abs(a) + (j > 0 ? std::abs(beta[j - 1]) : 0.0);
    if (b <= 1e-14 * std::max(alpha_scale, 1e-300)) {
      // Invariant subspace reached: the tridiagonal is exact.
      ++j;
      break;
    }
    beta.push_back(b);
    V.col(j + 1) = w / b;
    U.col(j + 1) = bw / b;

    if ((j + 1) % 8 == 0 || j + 1 == max_iter) {
      double theta;
      Eigen::VectorXd s;
      solve_tridiag(j + 1, theta, s);
      double est = b * std::abs(s[j]) / std::max(std::abs(theta), 1e-300);
      if (est <= tol) {
        ++j;
        break;
      }
    }
  }

  int m = static_cast<int>(alpha.size());
  if (m == 0) return result;
  double theta;
  Eigen::VectorXd s;
  solve_tridiag(m, theta, s);
  Eigen::VectorXd x = V.leftCols(m) * s;
  // True residual in the Euclidean norm.
  Eigen::VectorXd rvec = apply_A(x) - theta * apply_B(x);
  double denom = std::max(std::abs(theta) * apply_B(x).norm(), 1e-300);
  result.residual = rvec.norm() / denom;
  result.lambda = theta;
  result.witness = x;
  result.iterations = m;
  result.converged = result.residual <= 10.0 * tol;
  return result;
}

double power_iteration_rayleigh(const ApplyFn& apply_A,
                                const ApplyFn& apply_Binv,
                                const ApplyFn& apply_B,
                                const Eigen::VectorXd& x0, int iters) {
  Eigen::VectorXd x = x0;
  double nb = std::sqrt(std::max(x.dot(apply_B(x)), 0.0));
  if (nb == 0.0) return 0.0;
  x /= nb;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd y = apply_Binv(apply_A(x));
    double norm_b = std::sqrt(std::max(y.dot(apply_B(y)), 0.0));
    if (norm_b <= 1e-300) return 0.0;  // A x = 0: quotient collapsed
    x = y / norm_b;
  }
  double num = x.dot(apply_A(x));
  double den = x.dot(apply_B(x));
  return num / den;
}

//------------------------------------------------------------------------------
// Sparse SPD solve
//------------------------------------------------------------------------------

Eigen::VectorXd sparse_solve_spd(const SparseSymmetric& M,
                                 const Eigen::VectorXd& b) {
  if (M.order() != b.size())
    throw std::invalid_argument("sparse_solve_spd: size mismatch");
  if (!b.allFinite())
    throw std::invalid_argument("sparse_solve_spd: non-finite rhs");
  double bnorm = b.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> solver;
  solver.compute(M.lower());
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("sparse_solve_spd: factorization failed");
  if ((solver.vectorD().array() <= 0.0).any())
    throw std::runtime_error("sparse_solve_spd: matrix not positive definite");

  Eigen::VectorXd x = solver.solve(b);
  // One round of iterative refinement, then enforce the contract.
  Eigen::VectorXd r = b - M.apply(x);
  if (r.norm() > 1e-10 * bnorm) x += solver.solve(r);
  r = b - M.apply(x);
  if (r.norm() > 1e-10 * bnorm)
    throw std::runtime_error("sparse_solve_spd: residual contract violated");
  return x;
}

}  // namespace hfem
