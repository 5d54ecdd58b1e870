#pragma once

#include "aoed/common.hpp"

#include <array>
#include <string>

namespace aoed {

enum class PenaltyKind { l1, phi_eps };

/// Sparsifying penalty. For phi_eps the per-weight function is
///   f(w) = w/eps              on [0, eps/2]
///   f(w) = p(w)               on (eps/2, 2 eps]
///   f(w) = 1                  above 2 eps
/// with p the cubic matching value and slope at both knots.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::l1;
  double gamma = 0.0;
  double eps = 0.0;
  std::array<double, 4> cubic{};  // p(w) = c0 + c1 w + c2 w^2 + c3 w^3

  static PenaltySpec l1(double gamma);
  static PenaltySpec phi_eps(double gamma, double eps);
};

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& s);

struct PenaltyValue {
  double value = 0.0;
  Vector gradient;
};

/// Unscaled penalty (gamma is applied by the caller). Throws DomainError for
/// weights outside [0, 1].
PenaltyValue penalty_value_grad(const Vector& w, const PenaltySpec& spec);

// Scalar f and f' for the phi_eps penalty.
double phi_eps_value(double w, double eps);
double phi_eps_derivative(double w, double eps);

}  // namespace aoed
