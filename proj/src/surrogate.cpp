#include "aoed/surrogate.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace aoed {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kRankCutoff = 1e-12;

Matrix orthonormal_basis(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

Matrix stack(const std::vector<Vector>& cols) {
  Matrix m(cols.front().size(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Index>(j)) = cols[j];
  return m;
}

Vector expand_time_major(const Vector& w, Index q) {
  const Index ns = w.size();
  if (ns == 0 || q % ns != 0) throw DomainError("design weights do not match the observation layout");
  Vector out(q);
  for (Index b = 0; b < q / ns; ++b) out.segment(b * ns, ns) = w;
  return out;
}

}  // namespace

LowRankSurrogate build_surrogate(const LinearMap& op, const SparseMatrix& mass,
                                 const WhiteningOperator& whitening, int num_sensors,
                                 const SurrogateOptions& opt) {
  const Index n = op.cols();
  const Index q = op.rows();
  const Index k = opt.rank + opt.oversampling;
  if (opt.rank < 1 || opt.oversampling < 0 || opt.power_iterations < 0) {
    throw DomainError("surrogate: need rank >= 1, oversampling >= 0, power iterations >= 0");
  }
  if (k > std::min(q, n)) {
    std::ostringstream msg;
    msg << "surrogate: rank + oversampling = " << k << " exceeds min(q, n) = " << std::min(q, n);
    throw DomainError(msg.str());
  }
  if (mass.rows() != n || whitening.size() != n) throw DomainError("surrogate: mass/whitening size mismatch");
  if (num_sensors < 1 || q % num_sensors != 0) throw DomainError("surrogate: bad sensor count");

  const Matrix omega = stack(whitening.whitened_gaussian(opt.seed, static_cast<int>(k)));
  Matrix basis = orthonormal_basis(kernels::apply_columns(op, omega, opt.execution));
  for (int it = 0; it < opt.power_iterations; ++it) {
    const Matrix z = kernels::apply_adjoint_columns(op, basis, opt.execution);
    basis = orthonormal_basis(kernels::apply_columns(op, z, opt.execution));
  }
  // B* = F~* Q; with M = P^T L L^T P, the Euclidean SVD of L^T P B* gives the
  // M-orthonormal right factor V = P^T L^{-T} W.
  const Matrix bstar = kernels::apply_adjoint_columns(op, basis, opt.execution);
  Eigen::SimplicialLLT<SparseMatrix> llt(mass);
  if (llt.info() != Eigen::Success) throw SolverError("surrogate: mass factorization failed");
  const SparseMatrix lower = llt.matrixL();
  const Matrix c = lower.transpose() * (llt.permutationP() * bstar);
  Eigen::BDCSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);

  const Vector& sigma = svd.singularValues();
  int keep = opt.rank;
  LowRankSurrogate s;
  if (sigma.size() == 0 || sigma[0] <= 0.0) {
    throw SolverError("surrogate: operator is numerically zero");
  }
  for (int i = 0; i < opt.rank; ++i) {
    if (sigma[i] <= kRankCutoff * sigma[0]) {
      keep = i;
      std::ostringstream msg;
      msg << "effective rank " << keep << " is below the requested rank " << opt.rank;
      s.warnings.push_back(msg.str());
      break;
    }
  }
  s.S = sigma.head(keep);
  s.U = basis * svd.matrixV().leftCols(keep);
  const Matrix w_left = svd.matrixU().leftCols(keep);
  s.V = llt.permutationPinv() * Matrix(llt.matrixU().solve(w_left));
  s.mass_v = mass * s.V;
  s.num_sensors = num_sensors;
  s.requested_rank = opt.rank;
  s.oversampling = opt.oversampling;
  s.power_iterations = opt.power_iterations;
  s.seed = opt.seed;

  if (opt.residual_probes > 0) {
    const Matrix probes = stack(whitening.whitened_gaussian(opt.seed ^ 0x9e3779b97f4a7c15ULL,
                                                            opt.residual_probes));
    const Matrix full = kernels::apply_columns(op, probes, opt.execution);
    for (Index j = 0; j < probes.cols(); ++j) {
      const Vector approx = s.apply(probes.col(j));
      const double denom = full.col(j).norm();
      if (denom > 0.0) s.probe_residual = std::max(s.probe_residual, (full.col(j) - approx).norm() / denom);
    }
    if (s.probe_residual > opt.residual_tolerance) {
      std::ostringstream msg;
      msg << "fresh-probe relative residual " << s.probe_residual << " exceeds tolerance "
          << opt.residual_tolerance;
      s.warnings.push_back(msg.str());
    }
  }
  return s;
}

HessianFactors hessian_factors(const LowRankSurrogate& s, const Vector& w, bool with_vectors) {
  if (w.size() != s.num_sensors) throw DomainError("hessian_factors: weights need one entry per sensor");
  if ((w.array() < 0.0).any() || (w.array() > 1.0).any()) {
    throw DomainError("hessian_factors: weights must lie in [0, 1]");
  }
  const Vector wq = expand_time_major(w, s.obs_dim());
  const Matrix us = s.U * s.S.asDiagonal();
  Matrix g = us.transpose() * wq.asDiagonal() * us;
  g = 0.5 * (g + g.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  HessianFactors f;
  f.E = eig.eigenvectors().rowwise().reverse();
  f.lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
  f.D = f.lambda.array() / (1.0 + f.lambda.array());
  if (with_vectors) f.V = s.V * f.E;
  return f;
}

std::pair<Vector, Vector> apply_H_inv(const LowRankSurrogate& s, const HessianFactors& f,
                                      const PriorOperator& prior, const Vector& z) {
  const Vector sz = prior.apply_cov_sqrt(z);
  const Vector c = s.mass_v.transpose() * sz;
  Vector q_hat = sz - s.V * (f.E * f.D.cwiseProduct(f.E.transpose() * c));
  Vector q = prior.apply_cov_sqrt(q_hat);
  return {std::move(q_hat), std::move(q)};
}

Vector apply_Fq(const LowRankSurrogate& s, const Vector& q_hat) { return s.apply(q_hat); }

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols) throw ConfigError("surrogate file: matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

}  // namespace

void save_surrogate(const std::filesystem::path& path, const LowRankSurrogate& s) {
  nlohmann::json j;
  j["format"] = "aoed-lowrank-surrogate";
  j["version"] = kFormatVersion;
  j["num_sensors"] = s.num_sensors;
  j["requested_rank"] = s.requested_rank;
  j["oversampling"] = s.oversampling;
  j["power_iterations"] = s.power_iterations;
  j["seed"] = s.seed;
  j["probe_residual"] = s.probe_residual;
  j["warnings"] = s.warnings;
  j["S"] = std::vector<double>(s.S.data(), s.S.data() + s.S.size());
  j["U"] = matrix_to_json(s.U);
  j["V"] = matrix_to_json(s.V);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write surrogate file " + path.string());
  out << j.dump();
}

LowRankSurrogate load_surrogate(const std::filesystem::path& path, const SparseMatrix& mass) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open surrogate file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("surrogate file: ") + e.what());
  }
  if (j.value("format", "") != "aoed-lowrank-surrogate") throw ConfigError("surrogate file: unknown format");
  if (j.value("version", 0) != kFormatVersion) {
    throw ConfigError("surrogate file: unsupported version " + std::to_string(j.value("version", 0)));
  }
  LowRankSurrogate s;
  try {
    s.num_sensors = j.at("num_sensors").get<int>();
    s.requested_rank = j.at("requested_rank").get<int>();
    s.oversampling = j.at("oversampling").get<int>();
    s.power_iterations = j.at("power_iterations").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.probe_residual = j.at("probe_residual").get<double>();
    s.warnings = j.at("warnings").get<std::vector<std::string>>();
    const auto sv = j.at("S").get<std::vector<double>>();
    s.S = Eigen::Map<const Vector>(sv.data(), static_cast<Index>(sv.size()));
    s.U = matrix_from_json(j.at("U"));
    s.V = matrix_from_json(j.at("V"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("surrogate file: ") + e.what());
  }
  if (s.U.cols() != s.S.size() || s.V.cols() != s.S.size() || s.V.rows() != mass.rows()) {
    throw ConfigError("surrogate file: inconsistent dimensions");
  }
  s.mass_v = mass * s.V;
  return s;
}

}  // namespace aoed
