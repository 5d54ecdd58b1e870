#include "aoed/penalty.hpp"

#include <cmath>

namespace aoed {

PenaltySpec PenaltySpec::l1(double gamma) {
  if (!(gamma >= 0.0)) throw DomainError("penalty: gamma must be non-negative");
  PenaltySpec s;
  s.kind = PenaltyKind::l1;
  s.gamma = gamma;
  return s;
}

PenaltySpec PenaltySpec::phi_eps(double gamma, double eps) {
  if (!(gamma >= 0.0)) throw DomainError("penalty: gamma must be non-negative");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("penalty: eps must be positive");
  PenaltySpec s;
  s.kind = PenaltyKind::phi_eps;
  s.gamma = gamma;
  s.eps = eps;
  // p(w) = 1 + (4 / (27 eps^3)) (w - 2 eps)^3, expanded
  const double c3 = 4.0 / (27.0 * eps * eps * eps);
  s.cubic = {1.0 - 8.0 * eps * eps * eps * c3, 12.0 * eps * eps * c3, -6.0 * eps * c3, c3};
  return s;
}

std::string to_string(PenaltyKind kind) { return kind == PenaltyKind::l1 ? "l1" : "phi_eps"; }

PenaltyKind penalty_kind_from_string(const std::string& s) {
  if (s == "l1") return PenaltyKind::l1;
  if (s == "phi_eps") return PenaltyKind::phi_eps;
  throw ConfigError("unknown penalty kind '" + s + "' (expected l1 or phi_eps)");
}

double phi_eps_value(double w, double eps) {
  if (w <= 0.5 * eps) return w / eps;
  if (w <= 2.0 * eps) {
    const double t = (w - 2.0 * eps) / (1.5 * eps);
    return 1.0 + 0.5 * t * t * t;
  }
  return 1.0;
}

double phi_eps_derivative(double w, double eps) {
  if (w <= 0.5 * eps) return 1.0 / eps;
  if (w <= 2.0 * eps) {
    const double t = (w - 2.0 * eps) / (1.5 * eps);
    return t * t / eps;
  }
  return 0.0;
}

PenaltyValue penalty_value_grad(const Vector& w, const PenaltySpec& spec) {
  if ((w.array() < 0.0).any() || (w.array() > 1.0).any() || !w.allFinite()) {
    throw DomainError("penalty: weights must lie in [0, 1]");
  }
  PenaltyValue out;
  if (spec.kind == PenaltyKind::l1) {
    out.value = w.sum();
    out.gradient = Vector::Ones(w.size());
    return out;
  }
  out.gradient.resize(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    out.value += phi_eps_value(w[i], spec.eps);
    out.gradient[i] = phi_eps_derivative(w[i], spec.eps);
  }
  return out;
}

}  // namespace aoed
