#pragma once

#include "aoed/common.hpp"
#include "aoed/mesh.hpp"

#include <array>

namespace aoed {

// Linear-Lagrange finite-element operators on a mesh.
struct FemOperators {
  SparseMatrix mass;       // consistent mass matrix, SPD
  SparseMatrix stiffness;  // pure-Neumann Laplacian, PSD with constants in its kernel
  Vector lumped_mass;      // row sums of `mass`
  Index n = 0;
};

struct ElementGeometry {
  double area = 0.0;
  // Gradients of the three barycentric basis functions.
  std::array<std::array<double, 2>, 3> grad{};
};

/// Area and basis gradients of triangle `tri`. Throws AssemblyError naming
/// the triangle when it is degenerate or negatively oriented.
ElementGeometry element_geometry(const Mesh& mesh, int tri);

/// Assembles M, K and the lumped mass with exact quadrature for P1 elements.
FemOperators assemble(const Mesh& mesh);

}  // namespace aoed
