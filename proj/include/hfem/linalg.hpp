// Numerical kernels for the audits and the solver: a dense symmetric
// eigensolver, a PSD generalized max-eigenvalue routine with explicit
// null-space policing, a matrix-free Lanczos for B-inner-product problems,
// and a sparse SPD solve with a residual contract.

#ifndef HFEM_LINALG_HPP
#define HFEM_LINALG_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>

namespace hfem {

//------------------------------------------------------------------------------
// Matrix containers
//------------------------------------------------------------------------------

// Dense symmetric matrix; stores the lower triangle packed so symmetry is
// structural rather than a runtime property.
class SymmetricDense {
 public:
  explicit SymmetricDense(int n);
  // Accepts a numerically symmetric matrix (averages the two triangles;
  // throws if they disagree beyond 1e-12 relative or contain non-finite
  // entries).
  static SymmetricDense from_full(const Eigen::MatrixXd& M);

  int order() const { return n_; }
  double at(int i, int j) const { return packed_[index(i, j)]; }
  double& at(int i, int j) { return packed_[index(i, j)]; }
  Eigen::MatrixXd full() const;

 private:
  std::ptrdiff_t index(int i, int j) const {
    if (i < j) std::swap(i, j);  // lower triangle slot (i >= j)
    return static_cast<std::ptrdiff_t>(j) * (2 * n_ - j - 1) / 2 + i;
  }
  int n_ = 0;
  Eigen::VectorXd packed_;
};

// Sparse symmetric matrix storing the lower triangle in compressed form.
class SparseSymmetric {
 public:
  SparseSymmetric() = default;
  // Triplets may address either triangle; (i, j) and (j, i) contributions
  // accumulate into one structural slot.
  static SparseSymmetric from_triplets(
      int n, const std::vector<Eigen::Triplet<double>>& triplets);

  int order() const { return static_cast<int>(lower_.rows()); }
  const Eigen::SparseMatrix<double>& lower() const { return lower_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd diagonal() const { return lower_.diagonal(); }

 private:
  Eigen::SparseMatrix<double> lower_;
};

//------------------------------------------------------------------------------
// Dense symmetric eigensolver
//------------------------------------------------------------------------------

struct SymEig {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

// Full eigendecomposition (divide and conquer).  Contract:
// ||A - Q Lambda Q^T||_F <= 1e-10 ||A||_F and ||Q^T Q - I||_F <= 1e-10.
SymEig sym_eig(const SymmetricDense& A);
SymEig sym_eig(const Eigen::MatrixXd& A);  // convenience, symmetrizes

//------------------------------------------------------------------------------
// Generalized max eigenvalue for PSD pencils
//------------------------------------------------------------------------------

struct GenEigResult {
  bool unbounded = false;
  // Bounded: max of x^T A x / x^T B x over range(B), with witness normalized
  // to witness^T B witness = 1.  Unbounded: witness lies in null(B) and
  // carries positive A-energy (a counterexample direction).
  double lambda = 0.0;
  Eigen::VectorXd witness;
  int b_rank = 0;
  double null_energy = 0.0;  // max A-energy over null(B), relative to scale(A)
};

// Spec-literal dense path: eigendecompose B, cut its spectrum at
// null_tol * lambda_max(B), verify A is annihilated on null(B) (otherwise
// "unbounded"), whiten, and take the top eigenpair of the reduced operator.
// Throws on indefinite inputs beyond tolerance.
GenEigResult gen_eig_max(const SymmetricDense& A, const SymmetricDense& B,
                         double null_tol = 1e-10);
GenEigResult gen_eig_max(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         double null_tol = 1e-10);

// Same reduction with a precomputed eigendecomposition of B, so several
// numerators can share one (expensive) factorization of a common B.
// A must already be symmetric.
GenEigResult gen_eig_max_reduced(const Eigen::MatrixXd& A, const SymEig& eig_b,
                                 double null_tol = 1e-10);

//------------------------------------------------------------------------------
// Matrix-free Lanczos in a B inner product
//------------------------------------------------------------------------------

using ApplyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LanczosResult {
  bool converged = false;
  double lambda = 0.0;
  Eigen::VectorXd witness;  // B-normalized Ritz vector
  int iterations = 0;
  double residual = 0.0;  // ||A x - lambda B x|| / (|lambda| ||B x||)
};

// Largest eigenpair of B^{-1} A, self-adjoint in the B inner product, via
// Lanczos with full reorthogonalization.  Pass identity closures for apply_B
// and apply_Binv to recover standard Lanczos.  Deterministic start vector.
LanczosResult lanczos_gen_eig_max(const ApplyFn& apply_A,
                                  const ApplyFn& apply_Binv,
                                  const ApplyFn& apply_B, int n,
                                  int max_iter = 600, double tol = 1e-9);

// Power iteration on the same operator starting from x0; returns the final
// Rayleigh quotient x^T A x / x^T B x.  Used as an independent cross-check of
// every audit eigenvalue.
double power_iteration_rayleigh(const ApplyFn& apply_A,
                                const ApplyFn& apply_Binv,
                                const ApplyFn& apply_B,
                                const Eigen::VectorXd& x0, int iters = 200);

// Deterministic pseudo-random unit vector (fixed generator, salted).
Eigen::VectorXd deterministic_unit_vector(int n, unsigned salt);

//------------------------------------------------------------------------------
// Sparse SPD solve
//------------------------------------------------------------------------------

// Simplicial LDLT with one step of iterative refinement; enforces the
// relative residual contract ||Mx - b|| <= 1e-10 ||b|| and throws if the
// factorization breaks down, the matrix is not positive definite, or the
// contract cannot be met.
Eigen::VectorXd sparse_solve_spd(const SparseSymmetric& M,
                                 const Eigen::VectorXd& b);

}  // namespace hfem

#endif  // HFEM_LINALG_HPP
