#include "aoed/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>

namespace aoed {

std::string to_string(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::converged: return "converged";
    case OptimizerStatus::max_iterations: return "max_iterations";
    case OptimizerStatus::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

double projected_gradient_norm(const Vector& w, const Vector& g) {
  return ((w - g).cwiseMax(0.0).cwiseMin(1.0) - w).norm();
}

namespace {

struct Eval {
  double total = 0.0;
  double objective = 0.0;
  double penalty = 0.0;
  Vector grad;
};

using Composite = std::function<Eval(const Vector&)>;

struct Pair {
  Vector s;
  Vector y;
};

struct InnerResult {
  Vector x;
  Eval eval;
  OptimizerStatus status = OptimizerStatus::max_iterations;
  int iterations = 0;
  int evaluations = 0;
  double initial_pg = 0.0;
  double final_pg = 0.0;
  std::vector<IterationRecord> history;
};

double box_pg_norm(const Vector& x, const Vector& g, double lo, double hi) {
  return ((x - g).cwiseMax(lo).cwiseMin(hi) - x).norm();
}

// Two-loop recursion restricted to the free index mask.
Vector two_loop(const std::deque<Pair>& mem, const Vector& g, const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
  const Vector fmask = free.cast<double>().matrix();
  Vector qv = g.cwiseProduct(fmask);
  std::vector<double> alpha(mem.size(), 0.0), rho(mem.size(), 0.0);
  double h0 = -1.0;
  for (std::size_t k = mem.size(); k-- > 0;) {
    const Vector sf = mem[k].s.cwiseProduct(fmask);
    const Vector yf = mem[k].y.cwiseProduct(fmask);
    const double sy = sf.dot(yf);
    if (!(sy > 1e-12 * sf.norm() * yf.norm()) || sy <= 0.0) continue;
    rho[k] = 1.0 / sy;
    alpha[k] = rho[k] * sf.dot(qv);
    qv -= alpha[k] * yf;
    if (h0 < 0.0) h0 = sy / yf.squaredNorm();
  }
  if (h0 < 0.0) {
    const double gmax = g.cwiseProduct(fmask).cwiseAbs().maxCoeff();
    h0 = gmax > 0.0 ? std::min(1.0, 1.0 / gmax) : 1.0;
  }
  Vector r = h0 * qv;
  for (std::size_t k = 0; k < mem.size(); ++k) {
    if (rho[k] == 0.0) continue;
    const Vector sf = mem[k].s.cwiseProduct(fmask);
    const Vector yf = mem[k].y.cwiseProduct(fmask);
    const double beta = rho[k] * yf.dot(r);
    r += (alpha[k] - beta) * sf;
  }
  return -r;
}

InnerResult projected_lbfgs(const Composite& fun, const Vector& x0, double lo, double hi,
                            const OptimizerOptions& opt) {
  InnerResult res;
  auto project = [&](const Vector& v) -> Vector { return v.cwiseMax(lo).cwiseMin(hi); };
  auto active_count = [&](const Vector& v) {
    return static_cast<int>((v.array() > opt.active_threshold).count());
  };
  Vector x = project(x0);
  Eval cur = fun(x);
  ++res.evaluations;
  double pg = box_pg_norm(x, cur.grad, lo, hi);
  res.initial_pg = pg;
  res.history.push_back({0, cur.objective, cur.penalty, pg, active_count(x)});
  std::deque<Pair> mem;

  const double target = res.initial_pg / opt.grad_reduction;
  res.status = OptimizerStatus::max_iterations;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    if (pg <= target || pg == 0.0) {
      res.status = OptimizerStatus::converged;
      break;
    }
    const double eps_act = std::min(1e-8, pg);
    Eigen::Array<bool, Eigen::Dynamic, 1> free(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const bool at_lo = x[i] <= lo + eps_act && cur.grad[i] > 0.0;
      const bool at_hi = x[i] >= hi - eps_act && cur.grad[i] < 0.0;
      free[i] = !(at_lo || at_hi);
    }

    bool accepted = false;
    Vector x_new;
    Eval next;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Vector d = attempt == 0 ? two_loop(mem, cur.grad, free) : Vector::Zero(x.size());
      if (attempt == 1) {
        mem.clear();
        const double gmax = cur.grad.cwiseAbs().maxCoeff();
        d = -cur.grad / (gmax > 0.0 ? gmax : 1.0);
      } else {
        for (Index i = 0; i < x.size(); ++i) {
          if (!free[i]) d[i] = -cur.grad[i];
        }
        if (cur.grad.dot(d) >= 0.0) {
          mem.clear();
          const double gmax = cur.grad.cwiseAbs().maxCoeff();
          d = -cur.grad / (gmax > 0.0 ? gmax : 1.0);
        }
      }
      double step = 1.0;
      for (int ls = 0; ls < opt.max_line_search; ++ls, step *= 0.5) {
        x_new = project(x + step * d);
        const Vector dx = x_new - x;
        if (dx.squaredNorm() == 0.0) break;
        const double slope = cur.grad.dot(dx);
        if (slope >= 0.0) continue;
        next = fun(x_new);
        ++res.evaluations;
        if (next.total <= cur.total + opt.armijo * slope) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      res.status = OptimizerStatus::line_search_failure;
      break;
    }
    Pair p{x_new - x, next.grad - cur.grad};
    const double sy = p.s.dot(p.y);
    if (sy > 1e-10 * p.s.norm() * p.y.norm() && sy > 0.0) {
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
    }
    x = std::move(x_new);
    cur = std::move(next);
    pg = box_pg_norm(x, cur.grad, lo, hi);
    res.iterations = iter;
    res.history.push_back({iter, cur.objective, cur.penalty, pg, active_count(x)});
  }
  if (res.status == OptimizerStatus::max_iterations && pg <= target) res.status = OptimizerStatus::converged;
  res.x = std::move(x);
  res.eval = std::move(cur);
  res.final_pg = pg;
  return res;
}

}  // namespace

OptimizationResult optimize(const SmoothObjective& theta, const Vector& w0, const PenaltySpec& penalty,
                            const OptimizerOptions& options) {
  if (w0.size() == 0) throw DomainError("optimize: empty initial weights");
  if (!w0.allFinite() || (w0.array() < 0.0).any() || (w0.array() > 1.0).any()) {
    throw DomainError("optimize: initial weights must lie in [0, 1]");
  }
  if (options.max_iter < 0 || options.memory < 1 || !(options.grad_reduction > 1.0)) {
    throw DomainError("optimize: invalid optimizer options");
  }
  auto composite = [&](double mu) {
    return [&, mu](const Vector& w) {
      const ObjectiveValue ov = theta(w);
      const PenaltyValue pv = penalty_value_grad(w, penalty);
      Eval e;
      e.objective = ov.value;
      e.penalty = pv.value;
      e.total = ov.value + penalty.gamma * pv.value;
      e.grad = ov.gradient + penalty.gamma * pv.gradient;
      if (mu > 0.0) {
        e.total -= mu * (w.array().log() + (1.0 - w.array()).log()).sum();
        e.grad.array() -= mu * (1.0 / w.array() - 1.0 / (1.0 - w.array()));
      }
      return e;
    };
  };

  OptimizationResult out;
  out.design.penalty = penalty;
  out.design.active_threshold = options.active_threshold;
  if (!options.log_barrier) {
    InnerResult r = projected_lbfgs(composite(0.0), w0, 0.0, 1.0, options);
    out.design.w = std::move(r.x);
    out.status = r.status;
    out.iterations = r.iterations;
    out.evaluations = r.evaluations;
    out.objective = r.eval.objective;
    out.penalty = r.eval.penalty;
    out.initial_pg = r.initial_pg;
    out.history = std::move(r.history);
  } else {
    // interior iterates only; the barrier keeps them off the bounds
    const double margin = 1e-12;
    Vector w = w0.cwiseMax(1e-3).cwiseMin(1.0 - 1e-3);
    double mu = options.barrier_mu0;
    for (int stage = 0; stage < options.barrier_stages; ++stage, mu *= options.barrier_decrease) {
      InnerResult r = projected_lbfgs(composite(mu), w, margin, 1.0 - margin, options);
      for (auto& h : r.history) {
        h.iter += out.iterations;
        out.history.push_back(h);
      }
      if (stage == 0) out.initial_pg = r.initial_pg;
      out.iterations += r.iterations;
      out.evaluations += r.evaluations;
      out.status = r.status;
      out.objective = r.eval.objective;
      out.penalty = r.eval.penalty;
      w = std::move(r.x);
    }
    out.design.w = std::move(w);
  }
  const ObjectiveValue final_theta = theta(out.design.w);
  const PenaltyValue final_pen = penalty_value_grad(out.design.w, penalty);
  out.final_pg = projected_gradient_norm(out.design.w, final_theta.gradient + penalty.gamma * final_pen.gradient);
  return out;
}

int ContinuationResult::total_iterations() const {
  int n = 0;
  for (const auto& s : stages) n += s.result.iterations;
  return n;
}

std::vector<double> geometric_schedule(double ratio, int count) {
  if (!(ratio > 0.0 && ratio < 1.0) || count < 1) throw DomainError("eps schedule: need 0 < ratio < 1");
  std::vector<double> eps;
  double e = 1.0;
  for (int i = 1; i <= count; ++i) {
    e *= ratio;
    eps.push_back(e);
  }
  return eps;
}

ContinuationResult continuation_solve(const SmoothObjective& theta, const Vector& w0, double gamma,
                                      const std::vector<double>& eps_schedule,
                                      const OptimizerOptions& options, double binary_tol) {
  for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
    if (!(eps_schedule[i] > 0.0) || (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))) {
      throw DomainError("continuation: eps schedule must be positive and strictly decreasing");
    }
  }
  ContinuationResult out;
  Vector w = w0;
  {
    const PenaltySpec spec = PenaltySpec::l1(gamma);
    OptimizationResult r = optimize(theta, w, spec, options);
    w = r.design.w;
    out.stages.push_back({spec, std::move(r)});
  }
  for (double eps : eps_schedule) {
    const PenaltySpec spec = PenaltySpec::phi_eps(gamma, eps);
    OptimizationResult r = optimize(theta, w, spec, options);
    w = r.design.w;
    out.stages.push_back({spec, std::move(r)});
  }
  out.design = out.stages.back().result.design;
  for (Index i = 0; i < w.size(); ++i) {
    if (std::min(w[i], 1.0 - w[i]) > binary_tol) out.non_binary.push_back(static_cast<int>(i));
  }
  out.binary = out.non_binary.empty();
  return out;
}

Vector threshold_l1_design(const Vector& w, double threshold) {
  const double total = w.sum();
  Vector out = Vector::Zero(w.size());
  if (!(total > 0.0)) return out;
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] / total > threshold) out[i] = 1.0;
  }
  return out;
}

GammaSearchResult gamma_for_sensor_count(const SmoothObjective& theta, const Vector& w0, int target,
                                         double gamma_lo, double gamma_hi, int max_steps,
                                         const OptimizerOptions& options, double threshold) {
  if (!(gamma_lo > 0.0 && gamma_hi > gamma_lo)) throw DomainError("gamma search: need 0 < lo < hi");
  GammaSearchResult best;
  int best_gap = std::numeric_limits<int>::max();
  double lo = gamma_lo, hi = gamma_hi;
  // stop once the bracket has collapsed: counts jump, so an exact hit may not exist
  for (int step = 0; step < max_steps && hi > lo * (1.0 + 1e-3); ++step) {
    const double mid = std::sqrt(lo * hi);
    OptimizationResult r = optimize(theta, w0, PenaltySpec::l1(mid), options);
    const int count = static_cast<int>(threshold_l1_design(r.design.w, threshold).sum());
    const int gap = std::abs(count - target);
    if (gap < best_gap || (gap == best_gap && count <= target)) {
      best_gap = gap;
      best = {mid, count, std::move(r)};
    }
    if (count == target) break;
    if (count > target) lo = mid; else hi = mid;
  }
  return best;
}

void write_optimizer_log(std::ostream& out, const std::vector<IterationRecord>& history, bool header) {
  if (header) out << "iter,objective,penalty,projected_grad_norm,n_active_sensors\n";
  out << std::setprecision(17);
  for (const auto& h : history) {
    out << h.iter << ',' << h.objective << ',' << h.penalty << ',' << h.projected_grad_norm << ','
        << h.n_active << '\n';
  }
}

}  // namespace aoed
