#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vtsdf/geometry.hpp"
#include "vtsdf/rng.hpp"

namespace vtsdf {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> faces;

  bool empty() const { return faces.empty(); }
};

// PLY (ascii or binary little-endian) and OBJ by file extension; meters.
TriangleMesh load_mesh(const std::string& path);
void save_ply(const TriangleMesh& mesh, const std::string& path);

double mesh_area(const TriangleMesh& mesh);
double mesh_volume(const TriangleMesh& mesh);  // signed, positive if outward

// Every undirected edge used by exactly two faces, once per direction.
bool is_watertight(const TriangleMesh& mesh);

// Area-weighted surface samples via inverse-CDF over face areas; seeded.
std::vector<Vec3> sample_mesh_points(const TriangleMesh& mesh, int n, Rng& rng);

// Closest point on triangle (a,b,c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c);

// Uniform-grid acceleration over mesh triangles for closest-point queries.
class MeshDistanceGrid {
 public:
  MeshDistanceGrid() = default;
  explicit MeshDistanceGrid(const TriangleMesh& mesh, double cell = 0.0);

  // Unsigned distance; optionally reports closest point and triangle index.
  double distance(const Vec3& p, Vec3* closest = nullptr,
                  int* tri = nullptr) const;

  const TriangleMesh& mesh() const { return mesh_; }

 private:
  int cell_index(int x, int y, int z) const {
    return (z * dims_[1] + y) * dims_[0] + x;
  }

  TriangleMesh mesh_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  int dims_[3] = {0, 0, 0};
  std::vector<std::vector<int>> bins_;
};

// Uniform-grid nearest-neighbour index over a fixed point set.
class PointGrid {
 public:
  PointGrid() = default;
  explicit PointGrid(const std::vector<Vec3>& pts, double cell = 0.0);

  // Distance to the nearest stored point (exact).
  double nn_distance(const Vec3& p, int* index = nullptr) const;

  const std::vector<Vec3>& points() const { return pts_; }

 private:
  int cell_index(int x, int y, int z) const {
    return (z * dims_[1] + y) * dims_[0] + x;
  }

  std::vector<Vec3> pts_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  int dims_[3] = {0, 0, 0};
  std::vector<std::vector<int>> bins_;
};

// Procedural test meshes.
TriangleMesh make_box_mesh(const Vec3& size, const Vec3& center = Vec3::Zero());
TriangleMesh make_icosphere(double radius, int subdivisions,
                            const Vec3& center = Vec3::Zero());

}  // namespace vtsdf
