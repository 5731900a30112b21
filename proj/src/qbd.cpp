#include "mdsq/qbd.hpp"

#include <algorithm>
#include <cmath>

namespace mdsq {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

double inf_norm(const MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

double rate_scale(const QbdBlocks& q) {
  return std::max({1.0, q.A0.cwiseAbs().maxCoeff(), q.A1.cwiseAbs().maxCoeff(),
                   q.A2.cwiseAbs().maxCoeff()});
}

void require_stable(const QbdBlocks& q) {
  const auto d = drift(q);
  if (!d.stable())
    throw NotPositiveRecurrent("QBD is not positive recurrent (up drift " + std::to_string(d.up_rate) +
                               " >= down drift " + std::to_string(d.down_rate) + ")");
}

}  // namespace

DriftCertificate drift(const QbdBlocks& q) {
  const int ql = q.ql();
  const MatrixXd Q = q.A0 + q.A1 + q.A2;
  Eigen::FullPivLU<MatrixXd> rank_probe(Q);
  rank_probe.setThreshold(1e-10);
  if (ql > 1 && rank_probe.rank() < ql - 1)
    throw std::domain_error("level generator A0+A1+A2 is reducible");

  // v Q = 0 with v 1 = 1: replace the last balance equation by normalization.
  MatrixXd M = Q;
  M.col(ql - 1).setOnes();
  VectorXd rhs = VectorXd::Zero(ql);
  rhs(ql - 1) = 1.0;
  const VectorXd v = M.transpose().partialPivLu().solve(rhs);

  DriftCertificate d;
  d.v = v.transpose();
  d.up_rate = (d.v * q.A2).sum();
  d.down_rate = (d.v * q.A0).sum();
  return d;
}

double r_residual(const QbdBlocks& q, const MatrixXd& R) {
  return inf_norm(q.A2 + R * q.A1 + R * R * q.A0);
}

MatrixXd iterate_R(const QbdBlocks& q, MatrixXd R, double tol, long max_iter) {
  const int ql = q.ql();
  const MatrixXd A1inv = q.A1.partialPivLu().solve(MatrixXd::Identity(ql, ql));
  double res = r_residual(q, R);
  for (long it = 0; it < max_iter; ++it) {
    MatrixXd next = -(q.A2 + R * R * q.A0) * A1inv;
    const double step = inf_norm(next - R);
    R = std::move(next);
    if (step < tol * 1e-2) {
      res = r_residual(q, R);
      if (res < tol) return R;
    }
  }
  res = r_residual(q, R);
  throw ConvergenceError("functional iteration for R did not converge", res);
}

MatrixXd solve_R(const QbdBlocks& q, double tol, long max_iter, RAlgorithm algorithm) {
  require_stable(q);
  const int ql = q.ql();
  if (algorithm == RAlgorithm::FunctionalIteration)
    return iterate_R(q, MatrixXd::Zero(ql, ql), tol, max_iter);

  const MatrixXd I = MatrixXd::Identity(ql, ql);
  const auto negA1 = (-q.A1).partialPivLu();
  MatrixXd L = negA1.solve(q.A0);  // one step down
  MatrixXd H = negA1.solve(q.A2);  // one step up
  MatrixXd G = L, T = H;
  const VectorXd ones = VectorXd::Ones(ql);
  double err = 1.0, best = 1.0;
  int stalled = 0;
  long it = 0;
  for (; it < max_iter; ++it) {
    const MatrixXd U = H * L + L * H;
    const auto lu = (I - U).partialPivLu();
    const MatrixXd L2 = L * L, H2 = H * H;
    L = lu.solve(L2);
    H = lu.solve(H2);
    G += T * L;
    T = T * H;
    err = (ones - G * ones).cwiseAbs().maxCoeff();
    if (err < tol) break;
    // Rounding floor: quadratic convergence has stopped paying off.
    if (err < best) best = err, stalled = 0;
    else if (++stalled >= 3 && err < 1e-8) break;
  }
  if (it == max_iter) throw ConvergenceError("logarithmic reduction did not converge", err);
  MatrixXd R = q.A2 * (-(q.A1 + q.A2 * G)).partialPivLu().solve(I);
  const double res = r_residual(q, R);
  if (res >= tol * rate_scale(q))
    throw ConvergenceError("R from logarithmic reduction misses the tolerance", res);
  return R;
}

RowVectorXd StationaryDistribution::level(int j) const {
  if (j == 0) return pi_boundary;
  RowVectorXd x = pi_level1;
  for (int i = 1; i < j; ++i) x = x * R;
  return x;
}

RowVectorXd StationaryDistribution::levels_from(int j) const {
  return level(j) * tail_inverse;
}

StationaryDistribution stationary(const QbdBlocks& q, double tol) {
  StationaryDistribution st;
  st.R = solve_R(q, tol);
  const int qb = q.qb(), ql = q.ql(), dim = qb + ql;
  const MatrixXd I = MatrixXd::Identity(ql, ql);
  st.tail_inverse = (I - st.R).partialPivLu().solve(I);

  MatrixXd M(dim, dim);
  M.topLeftCorner(qb, qb) = q.B1;
  M.topRightCorner(qb, ql) = q.B2;
  M.bottomLeftCorner(ql, qb) = q.B0;
  M.bottomRightCorner(ql, ql) = q.A1 + st.R * q.A0;
  const MatrixXd balance = M;
  M.col(0).head(qb).setOnes();
  M.col(0).tail(ql) = st.tail_inverse.rowwise().sum();
  VectorXd rhs = VectorXd::Zero(dim);
  rhs(0) = 1.0;
  Eigen::PartialPivLU<MatrixXd> lu(M.transpose());
  if (std::abs(lu.determinant()) == 0.0 || !std::isfinite(lu.determinant()))
    throw std::runtime_error("boundary system is singular");
  const RowVectorXd x = lu.solve(rhs).transpose();
  st.pi_boundary = x.head(qb);
  st.pi_level1 = x.tail(ql);

  const double mass = st.pi_boundary.sum() + (st.pi_level1 * st.tail_inverse).sum();
  const double eq = (x * balance).cwiseAbs().maxCoeff();
  st.residual = std::max({eq, std::abs(mass - 1.0), st.pi_level1.sum() * r_residual(q, st.R)});
  return st;
}

double global_balance_residual(const QbdBlocks& q, const StationaryDistribution& st, int levels) {
  double worst = (st.pi_boundary * q.B1 + st.pi_level1 * q.B0).cwiseAbs().maxCoeff();
  RowVectorXd prev = st.pi_boundary, cur = st.pi_level1;
  for (int j = 1; j <= levels; ++j) {
    const RowVectorXd next = cur * st.R;
    const RowVectorXd from_below = j == 1 ? RowVectorXd(prev * q.B2) : RowVectorXd(prev * q.A2);
    const RowVectorXd flow = from_below + cur * q.A1 + next * q.A0;
    worst = std::max(worst, flow.cwiseAbs().maxCoeff());
    prev = cur;
    cur = next;
  }
  return worst;
}

QbdBlocks interpolate_blocks(const QbdBlocks& at0, const QbdBlocks& at1, double lambda) {
  QbdBlocks q = at0;
  q.B0 += lambda * (at1.B0 - at0.B0);
  q.B1 += lambda * (at1.B1 - at0.B1);
  q.B2 += lambda * (at1.B2 - at0.B2);
  q.A0 += lambda * (at1.A0 - at0.A0);
  q.A1 += lambda * (at1.A1 - at0.A1);
  q.A2 += lambda * (at1.A2 - at0.A2);
  return q;
}

double max_throughput(const SystemConfig& cfg, double abs_tol) {
  cfg.validate_allow_idle();
  const double upper = cfg.n * cfg.service_rate / cfg.k;
  if (cfg.policy != PolicyKind::Reservation) return upper;
  const QbdBlocks at0 = build_qbd(cfg.with_rate(0.0));
  const QbdBlocks at1 = build_qbd(cfg.with_rate(1.0));
  auto excess = [&](double lambda) {
    const auto d = drift(interpolate_blocks(at0, at1, lambda));
    return d.up_rate - d.down_rate;
  };
  double lo = 1e-9, hi = upper;
  if (excess(hi) < 0.0) return hi;
  while (hi - lo > abs_tol) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mdsq
