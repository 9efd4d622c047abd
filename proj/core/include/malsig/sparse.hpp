#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace malsig {

struct LabeledVector {
  std::vector<double> features;
  std::string family;
};

// Column-stacked training matrix A = [A_1 A_2 .. A_L], one contiguous block
// per family (families in lexicographic order), every column unit-norm.
struct Dictionary {
  Eigen::MatrixXd columns;                  // D x Nt
  std::vector<std::size_t> family_of_column;  // index into families
  std::vector<std::string> families;
  std::vector<std::size_t> block_start;     // size L + 1

  std::size_t dim() const noexcept { return static_cast<std::size_t>(columns.rows()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(columns.cols()); }
  std::size_t family_count() const noexcept { return families.size(); }
  std::size_t family_size(std::size_t k) const { return block_start[k + 1] - block_start[k]; }
};

// Throws DegenerateColumn (zero or non-finite column), HeterogeneousLength,
// InsufficientSamples (fewer than two families).
Dictionary build_dictionary(std::span<const LabeledVector> samples);

struct SolverOptions {
  int max_iterations = 2000;
  double abs_tol = 1e-7;
  double rel_tol = 1e-6;
  double rho = 1.0;
  bool adapt_rho = true;
  // Re-solves on the support found by ADMM and keeps the result when it is
  // feasible, sign-consistent and no worse in l1 norm.
  bool polish = true;
};

struct SparseCoefficients {
  Eigen::VectorXd alpha;
  int iterations = 0;
  double primal_residual = 0.0;  // max(0, ||w - A alpha|| - eps)
  bool converged = false;
  bool polished = false;
};

// Basis pursuit with inequality slack:
//   minimize ||alpha||_1  subject to  ||w - A alpha||_2 <= eps
// solved by ADMM on the splitting x = z, A x = y, ||y - w|| <= eps. The
// x-update factorization depends only on A, so one solver serves any number
// of queries against the same dictionary.
class L1Solver {
 public:
  explicit L1Solver(const Dictionary& dict, SolverOptions options = {});

  SparseCoefficients solve(const Eigen::VectorXd& w, double eps) const;

  const Dictionary& dictionary() const noexcept { return *dict_; }
  const SolverOptions& options() const noexcept { return options_; }

 private:
  Eigen::VectorXd solve_normal(const Eigen::VectorXd& rhs) const;

  const Dictionary* dict_;
  SolverOptions options_;
  bool wide_;  // D < Nt: factor I_D + A A^T and use Woodbury
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

SparseCoefficients solve_l1(const Dictionary& dict, const Eigen::VectorXd& w, double eps,
                            const SolverOptions& options = {});

// r_k = || w - A delta_k(alpha) ||_2 for every family k.
std::vector<double> residuals(const Dictionary& dict, const Eigen::VectorXd& w,
                              const SparseCoefficients& coefficients);

struct FamilyDecision {
  std::size_t family_index = 0;
  std::string family;
  std::vector<double> residuals;
  SparseCoefficients coefficients;
  bool tie = false;  // another family had exactly the minimum residual
};

struct SrcOptions {
  SolverOptions solver;
  // eps = max(eps_abs, eps_rel * ||w||).
  double eps_abs = 1e-6;
  double eps_rel = 0.0;

  static SrcOptions exact() { return {}; }
  static SrcOptions descriptors() { return {SolverOptions{}, 1e-6, 0.05}; }
};

FamilyDecision classify_src(const L1Solver& solver, const Eigen::VectorXd& w, const SrcOptions& options = {});
FamilyDecision classify_src(const Dictionary& dict, const Eigen::VectorXd& w, const SrcOptions& options = {});

}  // namespace malsig
