#pragma once

#include <string_view>

#include <Eigen/Eigenvalues>

#include "stepnav/common.hpp"
#include "stepnav/strapdown.hpp"

namespace stepnav {

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat3x12 = Eigen::Matrix<double, 3, 12>;
using Mat12x3 = Eigen::Matrix<double, 12, 3>;

/// Stacked error vector [dv^n, d_eps^n, b_a residual, b_g residual].
///
/// Sign convention: dv = v_est - v_true and the estimated attitude is
/// (I + [d_eps x]) T_true, which is the convention the F matrix below is
/// derived in. Bias residuals are true minus estimated bias.
struct ErrorState {
  Vec12 x = Vec12::Zero();

  auto velocity() const { return x.segment<3>(0); }
  auto misalignment() const { return x.segment<3>(3); }
  auto accel_bias() const { return x.segment<3>(6); }
  auto gyro_bias() const { return x.segment<3>(9); }
};

/// Per-axis diagonals of the continuous process noise Q^c, ordered as the
/// noise vector [w_a, w_g, w_ab, w_gb].
struct ProcessNoiseConfig {
  Vec3 accel_var = Vec3::Zero();
  Vec3 gyro_var = Vec3::Zero();
  Vec3 accel_bias_rw_var = Vec3::Zero();
  Vec3 gyro_bias_rw_var = Vec3::Zero();

  Vec12 diagonal() const;
  void validate() const;
};

struct MeasurementNoiseConfig {
  Vec3 variance = Vec3::Constant(1.0);

  void validate() const;
};

enum class AidingKind { Dvl, Gnss };

std::string_view to_string(AidingKind k);
AidingKind aiding_kind_from_string(std::string_view s);

/// DVL velocities are body frame (DVL-to-body alignment is identity);
/// GNSS velocities are NED.
struct AidingMeasurement {
  Vec3 velocity = Vec3::Zero();
  AidingKind frame = AidingKind::Gnss;
  double time = 0.0;
};

struct MeasurementModel {
  Mat3x12 H = Mat3x12::Zero();
  Vec3 residual = Vec3::Zero();  // estimated minus measured
};

Mat12 build_F(const NavState& state, const Vec3& specific_force_n);
Mat12 build_G(const Mat3& dcm);
Mat12 transition(const Mat12& F, double dt);
Mat12 discrete_Q(const Mat12& G, const Vec12& qc_diagonal, double dt);

MeasurementModel measurement_model(const AidingMeasurement& meas, const NavState& state);

struct InjectionResult {
  NavState state;
  bool large_angle = false;  // |d_eps| >= 0.5 rad; correction applied anyway
};

/// Closed-loop feedback of an error estimate into the nominal state.
InjectionResult inject_errors(const NavState& state, const ErrorState& dx);

struct FilterInit {
  ErrorState dx;
  Mat12 P;
};

FilterInit init_filter(const Mat12& Qd);

double symmetry_error(const Mat12& P);
double min_eigenvalue(const Mat12& P);

template <int N>
Eigen::Matrix<double, N, N> symmetrized(const Eigen::Matrix<double, N, N>& m) {
  return 0.5 * (m + m.transpose());
}

template <int N>
Eigen::Matrix<double, N, N> predict(const Eigen::Matrix<double, N, N>& P,
                                    const Eigen::Matrix<double, N, N>& Phi,
                                    const Eigen::Matrix<double, N, N>& Qd) {
  return symmetrized<N>(Phi * P * Phi.transpose() + Qd);
}

inline constexpr double kMaxInnovationCondition = 1e12;

/// K = P H^T (H P H^T + R)^{-1}. The innovation covariance is inverted in
/// closed form; an ill-conditioned or indefinite one raises
/// FilterDivergenceError.
template <int N, int M>
Eigen::Matrix<double, N, M> gain(const Eigen::Matrix<double, N, N>& P,
                                 const Eigen::Matrix<double, M, N>& H,
                                 const Eigen::Matrix<double, M, M>& R) {
  using MatM = Eigen::Matrix<double, M, M>;
  const MatM S = symmetrized<M>(H * P * H.transpose() + R);
  Eigen::SelfAdjointEigenSolver<MatM> es(S, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxInnovationCondition) {
    throw FilterDivergenceError("innovation covariance is singular or ill-conditioned");
  }
  return P * H.transpose() * S.inverse();
}

template <int N, int M>
struct UpdateOutput {
  Eigen::Matrix<double, N, 1> dx;
  Eigen::Matrix<double, N, N> P;
};

/// dx = K dz (zero prior, the error state is reset every cycle) and
/// P = (I - K H) P^-; the Joseph form is used when `joseph` is set.
template <int N, int M>
UpdateOutput<N, M> update(const Eigen::Matrix<double, M, 1>& dz,
                          const Eigen::Matrix<double, N, M>& K,
                          const Eigen::Matrix<double, N, N>& P_prior,
                          const Eigen::Matrix<double, M, N>& H,
                          const Eigen::Matrix<double, M, M>* R_joseph = nullptr) {
  using MatN = Eigen::Matrix<double, N, N>;
  UpdateOutput<N, M> out;
  out.dx = K * dz;
  const MatN IKH = MatN::Identity() - K * H;
  if (R_joseph) {
    out.P = symmetrized<N>(IKH * P_prior * IKH.transpose() + K * (*R_joseph) * K.transpose());
  } else {
    out.P = symmetrized<N>(IKH * P_prior);
  }
  return out;
}

struct FilterOptions {
  bool joseph_form = false;
};

struct FilterUpdate {
  ErrorState dx;
  bool large_angle = false;
};

/// Sequential es-EKF: covariance prediction every mechanization step and a
/// velocity update whenever an aiding measurement arrives.
class EsEkf {
 public:
  EsEkf(ProcessNoiseConfig process, MeasurementNoiseConfig measurement, FilterOptions options = {});

  /// P0 = Q^d evaluated at the initial attitude and step size.
  void initialize(const NavState& state, double dt);

  /// `specific_force_b` is the bias-corrected accelerometer sample.
  void predict(const NavState& state, const Vec3& specific_force_b, double dt);

  FilterUpdate update(NavState& state, const AidingMeasurement& meas);

  const Mat12& covariance() const { return P_; }

 private:
  ProcessNoiseConfig process_;
  MeasurementNoiseConfig measurement_;
  FilterOptions options_;
  Vec12 qc_;
  Mat12 P_ = Mat12::Zero();
};

}  // namespace stepnav
