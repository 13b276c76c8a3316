#pragma once

#include <vector>

#include "vtsdf/mesh.hpp"
#include "vtsdf/neural_field.hpp"

namespace vtsdf {

struct ExtractConfig {
  int resolution = 200;  // cells per side across the bound cube
  double iso = 0.0;
  // Coarse pass: the grid splits into block^3-cell blocks; a block is only
  // evaluated densely when some corner value comes within
  // slope_margin * (block half-diagonal) of the iso level. Safe while the
  // field's slope stays under slope_margin; block <= 1 forces a dense pass.
  int block = 4;
  double slope_margin = 1.5;
  bool largest_component_only = true;

  void validate() const;
};

// Marching cubes over an explicit (nx+1)(ny+1)(nz+1) lattice of values,
// x fastest, then y, then z. Vertices on shared lattice edges are welded;
// faces wind outward for negative-inside fields.
TriangleMesh marching_cubes(const std::vector<double>& values, int nx, int ny,
                            int nz, const Vec3& origin, double cell,
                            double iso);

// Iso-surface of a distance field over a bound cube, in the frame the field
// is evaluated in. Cell visit order matches the dense lattice pass, so the
// output is bit-identical to marching_cubes on the full grid whenever the
// coarse pass skips no crossing. Throws EmptySurface when nothing crosses.
TriangleMesh extract_mesh(const DistanceField& field, const Vec3& bound_center,
                          double bound_side, const ExtractConfig& cfg = {});

// Faces connected (through shared vertices) to the component with the
// largest total area; unreferenced vertices are dropped.
TriangleMesh largest_component(const TriangleMesh& mesh);

// V - E + F over welded vertices and undirected edges; 2 for a closed
// sphere-like surface.
int euler_characteristic(const TriangleMesh& mesh);

}  // namespace vtsdf
