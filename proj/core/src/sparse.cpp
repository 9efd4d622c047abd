#include "malsig/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "malsig/error.hpp"

namespace malsig {

Dictionary build_dictionary(std::span<const LabeledVector> samples) {
  if (samples.empty()) throw Error(Errc::InsufficientSamples, "dictionary needs samples");
  const std::size_t dim = samples.front().features.size();
  if (dim == 0) throw Error(Errc::HeterogeneousLength, "feature vectors are empty");

  std::map<std::string, std::vector<std::size_t>> by_family;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != dim)
      throw Error(Errc::HeterogeneousLength, "sample " + std::to_string(i) + " has length " +
                                                 std::to_string(samples[i].features.size()) +
                                                 ", expected " + std::to_string(dim));
    by_family[samples[i].family].push_back(i);
  }
  if (by_family.size() < 2) throw Error(Errc::InsufficientSamples, "dictionary needs at least two families");

  Dictionary dict;
  dict.columns.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples.size()));
  dict.block_start.push_back(0);
  Eigen::Index col = 0;
  for (const auto& [family, members] : by_family) {
    const std::size_t k = dict.families.size();
    dict.families.push_back(family);
    for (auto i : members) {
      const auto& f = samples[i].features;
      Eigen::Map<const Eigen::VectorXd> v(f.data(), static_cast<Eigen::Index>(dim));
      const double norm = v.norm();
      if (!std::isfinite(norm) || norm == 0.0)
        throw Error(Errc::DegenerateColumn, "sample " + std::to_string(i) + " (" + family +
                                                ") is zero or non-finite");
      dict.columns.col(col++) = v / norm;
      dict.family_of_column.push_back(k);
    }
    dict.block_start.push_back(static_cast<std::size_t>(col));
  }
  return dict;
}

L1Solver::L1Solver(const Dictionary& dict, SolverOptions options)
    : dict_(&dict), options_(options), wide_(dict.dim() < dict.size()) {
  const auto& a = dict.columns;
  Eigen::MatrixXd m = wide_ ? Eigen::MatrixXd(a * a.transpose()) : Eigen::MatrixXd(a.transpose() * a);
  m.diagonal().array() += 1.0;
  factor_.compute(m);
}

Eigen::VectorXd L1Solver::solve_normal(const Eigen::VectorXd& rhs) const {
  // (I + A^T A)^{-1} rhs
  const auto& a = dict_->columns;
  if (wide_) return rhs - a.transpose() * factor_.solve(a * rhs);
  return factor_.solve(rhs);
}

namespace {

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double kappa) {
  return v.unaryExpr([kappa](double x) {
    if (x > kappa) return x - kappa;
    if (x < -kappa) return x + kappa;
    return 0.0;
  });
}

struct Polished {
  Eigen::VectorXd beta;
  double l1 = 0.0;
  bool certified = false;
};

// Given a support and sign pattern, the slack problem restricted to that face
// has the closed form beta = beta_ls - t G^{-1} s, with t chosen so the
// residual sits on the eps-ball. lambda = residual / t is then a dual
// certificate whenever |A^T lambda| <= 1 off the support.
std::optional<Polished> polish_on_support(const Eigen::MatrixXd& a, const Eigen::VectorXd& w,
                                          double eps, const Eigen::VectorXd& z, double rel_cut) {
  const double zmax = z.cwiseAbs().maxCoeff();
  if (zmax == 0.0) return std::nullopt;
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (std::abs(z[i]) > rel_cut * zmax) support.push_back(i);
  const auto n_s = static_cast<Eigen::Index>(support.size());
  if (n_s == 0 || n_s > a.rows()) return std::nullopt;

  Eigen::MatrixXd as(a.rows(), n_s);
  Eigen::VectorXd signs(n_s);
  for (Eigen::Index j = 0; j < n_s; ++j) {
    as.col(j) = a.col(support[j]);
    signs[j] = z[support[j]] > 0 ? 1.0 : -1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(as);
  if (qr.rank() < n_s) return std::nullopt;
  const Eigen::VectorXd beta_ls = qr.solve(w);
  const double r0 = (as * beta_ls - w).norm();
  const double target = eps * (1.0 - 1e-6);
  if (r0 > target) return std::nullopt;

  const Eigen::MatrixXd gram = as.transpose() * as;
  const Eigen::VectorXd q = gram.ldlt().solve(signs);
  const double c = signs.dot(q);
  if (!(c > 0.0)) return std::nullopt;
  const double t = std::sqrt(std::max(0.0, target * target - r0 * r0) / c);
  const Eigen::VectorXd beta_s = beta_ls - t * q;
  for (Eigen::Index j = 0; j < n_s; ++j)
    if (beta_s[j] * signs[j] <= 0.0) return std::nullopt;

  Polished out;
  out.beta = Eigen::VectorXd::Zero(a.cols());
  for (Eigen::Index j = 0; j < n_s; ++j) out.beta[support[j]] = beta_s[j];
  out.l1 = beta_s.cwiseAbs().sum();
  if (t > 0.0) {
    const Eigen::VectorXd lambda = (w - as * beta_s) / t;
    out.certified = (a.transpose() * lambda).cwiseAbs().maxCoeff() <= 1.0 + 1e-6;
  }
  return out;
}

}  // namespace

SparseCoefficients L1Solver::solve(const Eigen::VectorXd& w_in, double eps) const {
  const auto& a = dict_->columns;
  const Eigen::Index n = a.cols();
  const Eigen::Index d = a.rows();
  if (w_in.size() != d)
    throw Error(Errc::DimensionMismatch, "query has length " + std::to_string(w_in.size()) +
                                             ", dictionary rows " + std::to_string(d));
  if (!w_in.allFinite()) throw Error(Errc::InvalidConfig, "query contains non-finite values");
  if (!(eps > 0.0)) throw Error(Errc::InvalidConfig, "eps must be positive");

  SparseCoefficients out;
  out.alpha = Eigen::VectorXd::Zero(n);
  const double scale = w_in.norm();
  if (scale <= eps) {
    out.converged = true;
    return out;
  }
  // Work on the unit-norm query so step sizes do not depend on feature scale.
  const Eigen::VectorXd w = w_in / scale;
  const double eps_n = eps / scale;

  double rho = options_.rho;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n), z = x, u = x;
  Eigen::VectorXd y = w, v = Eigen::VectorXd::Zero(d);
  const double sqrt_pri = std::sqrt(static_cast<double>(n + d));
  const double sqrt_dual = std::sqrt(static_cast<double>(n));

  // Over-relaxed ADMM; the x-update matrix does not involve rho, so rho can
  // be rebalanced freely without refactoring.
  constexpr double relax = 1.6;
  int it = 0;
  for (; it < options_.max_iterations; ++it) {
    x = solve_normal(z - u + a.transpose() * (y - v));
    const Eigen::VectorXd ax = a * x;
    const Eigen::VectorXd x_hat = relax * x + (1.0 - relax) * z;
    const Eigen::VectorXd ax_hat = relax * ax + (1.0 - relax) * y;

    const Eigen::VectorXd z_old = z, y_old = y;
    z = soft_threshold(x_hat + u, 1.0 / rho);
    const Eigen::VectorXd t = ax_hat + v - w;
    const double tn = t.norm();
    y = tn > eps_n ? Eigen::VectorXd(w + t * (eps_n / tn)) : Eigen::VectorXd(w + t);

    u += x_hat - z;
    v += ax_hat - y;

    if (it % 10 != 9 && it + 1 != options_.max_iterations) continue;
    const double r_norm = std::sqrt((x - z).squaredNorm() + (ax - y).squaredNorm());
    const double s_norm = rho * ((z - z_old) + a.transpose() * (y - y_old)).norm();
    const double eps_pri = sqrt_pri * options_.abs_tol +
                           options_.rel_tol * std::max(std::sqrt(x.squaredNorm() + ax.squaredNorm()),
                                                       std::sqrt(z.squaredNorm() + y.squaredNorm()));
    const double eps_dual = sqrt_dual * options_.abs_tol +
                            options_.rel_tol * rho * (u + a.transpose() * v).norm();
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      out.converged = true;
      ++it;
      break;
    }
    if (options_.adapt_rho && s_norm > 0.0 && r_norm > 0.0) {
      // Balance the residuals relative to their own tolerances.
      const double ratio = std::sqrt((r_norm / eps_pri) / (s_norm / eps_dual));
      if (ratio > 5.0 || ratio < 0.2) {
        const double f = std::clamp(ratio, 1e-3, 1e3);
        rho *= f;
        u /= f;
        v /= f;
      }
    }
  }
  out.iterations = it;

  Eigen::VectorXd best = z;
  if (options_.polish) {
    const double l1_admm = z.cwiseAbs().sum();
    // An ADMM iterate that overshoots the eps-ball buys a slightly smaller l1;
    // a feasible polished point within the stopping precision is preferred.
    const bool admm_infeasible = (w - a * z).norm() > eps_n;
    const double slack = admm_infeasible ? 10.0 * options_.rel_tol * l1_admm : 0.0;
    for (double cut : {0.0, 1e-6, 1e-3}) {
      auto p = polish_on_support(a, w, eps_n, z, cut);
      if (!p) continue;
      if (p->certified || p->l1 <= l1_admm + slack) {
        best = p->beta;
        out.polished = true;
        if (p->certified) out.converged = true;
        break;
      }
    }
  }

  out.alpha = best * scale;
  out.primal_residual = std::max(0.0, (w_in - a * out.alpha).norm() - eps);
  return out;
}

SparseCoefficients solve_l1(const Dictionary& dict, const Eigen::VectorXd& w, double eps,
                            const SolverOptions& options) {
  return L1Solver(dict, options).solve(w, eps);
}

std::vector<double> residuals(const Dictionary& dict, const Eigen::VectorXd& w,
                              const SparseCoefficients& coefficients) {
  if (static_cast<std::size_t>(coefficients.alpha.size()) != dict.size())
    throw Error(Errc::SizeMismatch, "coefficient vector does not match dictionary");
  if (static_cast<std::size_t>(w.size()) != dict.dim())
    throw Error(Errc::DimensionMismatch, "query does not match dictionary rows");
  std::vector<double> r(dict.family_count());
  for (std::size_t k = 0; k < dict.family_count(); ++k) {
    const auto start = static_cast<Eigen::Index>(dict.block_start[k]);
    const auto len = static_cast<Eigen::Index>(dict.family_size(k));
    r[k] = (w - dict.columns.middleCols(start, len) * coefficients.alpha.segment(start, len)).norm();
  }
  return r;
}

FamilyDecision classify_src(const L1Solver& solver, const Eigen::VectorXd& w, const SrcOptions& options) {
  const auto& dict = solver.dictionary();
  const double eps = std::max(options.eps_abs, options.eps_rel * w.norm());
  FamilyDecision decision;
  decision.coefficients = solver.solve(w, eps);
  decision.residuals = residuals(dict, w, decision.coefficients);
  const auto best = std::min_element(decision.residuals.begin(), decision.residuals.end());
  decision.family_index = static_cast<std::size_t>(best - decision.residuals.begin());
  decision.family = dict.families[decision.family_index];
  decision.tie = std::count(decision.residuals.begin(), decision.residuals.end(), *best) > 1;
  return decision;
}

FamilyDecision classify_src(const Dictionary& dict, const Eigen::VectorXd& w, const SrcOptions& options) {
  return classify_src(L1Solver(dict, options.solver), w, options);
}

}  // namespace malsig
