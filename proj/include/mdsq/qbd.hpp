#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mdsq/chain.hpp"
#include "mdsq/qbd_blocks.hpp"

namespace mdsq {

class NotPositiveRecurrent : public UnstableSystem {
 public:
  using UnstableSystem::UnstableSystem;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual;
};

/// Stationary vector v of the level generator A0+A1+A2 with the mean up- and
/// down-drift rates it induces. The QBD is positive recurrent iff up < down.
struct DriftCertificate {
  Eigen::RowVectorXd v;
  double up_rate = 0.0;
  double down_rate = 0.0;
  bool stable() const { return up_rate < down_rate; }
};

DriftCertificate drift(const QbdBlocks& q);

enum class RAlgorithm { LogarithmicReduction, FunctionalIteration };

/// Minimal nonnegative solution of A2 + R A1 + R^2 A0 = 0. Logarithmic
/// reduction computes G first and maps it to R; functional iteration starts
/// from R = 0. Throws NotPositiveRecurrent for unstable blocks and
/// ConvergenceError after max_iter sweeps.
Eigen::MatrixXd solve_R(const QbdBlocks& q, double tol = 1e-12, long max_iter = 1'000'000,
                        RAlgorithm algorithm = RAlgorithm::LogarithmicReduction);

/// Functional iteration R <- -(A2 + R^2 A0) A1^{-1} from an arbitrary seed.
Eigen::MatrixXd iterate_R(const QbdBlocks& q, Eigen::MatrixXd seed, double tol, long max_iter);

/// Infinity norm of A2 + R A1 + R^2 A0.
double r_residual(const QbdBlocks& q, const Eigen::MatrixXd& R);

struct StationaryDistribution {
  Eigen::RowVectorXd pi_boundary;
  Eigen::RowVectorXd pi_level1;
  Eigen::MatrixXd R;
  Eigen::MatrixXd tail_inverse;  ///< (I - R)^{-1}
  double residual = 0.0;

  /// pi_j for j >= 1; j == 0 returns the boundary vector.
  Eigen::RowVectorXd level(int j) const;
  /// Sum of pi_i over all levels i >= j (j >= 1).
  Eigen::RowVectorXd levels_from(int j) const;
  double boundary_mass() const { return pi_boundary.sum(); }
};

/// Solves the boundary equations with the matrix-geometric tail and normalizes.
StationaryDistribution stationary(const QbdBlocks& q, double tol = 1e-12);

/// Largest |(pi Q)_s| over the boundary and the first `levels` levels, computed
/// directly from the block rows.
double global_balance_residual(const QbdBlocks& q, const StationaryDistribution& st, int levels);

/// Maximum stable arrival rate lambda* for cfg's policy (arrival_rate ignored).
/// MkMn(t) returns n mu / k; Reservation(t) bisects up_rate - down_rate on
/// (1e-9, n mu / k] to absolute tolerance abs_tol.
double max_throughput(const SystemConfig& cfg, double abs_tol = 1e-9);

/// Blocks at arrival rate lambda from blocks built at 0 and 1 (rates are affine in lambda).
QbdBlocks interpolate_blocks(const QbdBlocks& at0, const QbdBlocks& at1, double lambda);

}  // namespace mdsq
