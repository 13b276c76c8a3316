#pragma once

#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vtsdf/geometry.hpp"
#include "vtsdf/mesh.hpp"

namespace vtsdf {

// Signed distance to a watertight triangle mesh; sign from angle-weighted
// pseudo-normals so edge/vertex queries stay robust. Built once, queried often.
class MeshSdf {
 public:
  explicit MeshSdf(TriangleMesh mesh);  // throws NonWatertightMesh

  double signed_distance(const Vec3& p) const;
  const TriangleMesh& mesh() const { return grid_.mesh(); }

 private:
  MeshDistanceGrid grid_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;                  // angle-weighted
  std::unordered_map<uint64_t, Vec3> edge_normals_;  // face-pair averaged
};

// Ground-truth scene geometry: analytic primitives, unions, or meshes.
// All shapes are expressed in the object frame; poses are applied externally.
struct GroundTruthShape {
  enum class Kind { Sphere, Box, RoundedBox, Capsule, Union, Mesh };

  Kind kind = Kind::Sphere;
  double radius = 0;               // sphere/rounded-box/capsule
  Vec3 half = Vec3::Zero();        // box half extents
  Vec3 a = Vec3::Zero();           // capsule endpoints
  Vec3 b = Vec3::Zero();
  std::vector<GroundTruthShape> children;   // union
  std::shared_ptr<const MeshSdf> mesh_sdf;  // mesh kind

  static GroundTruthShape sphere(double r);
  static GroundTruthShape box(const Vec3& size);       // full side lengths
  static GroundTruthShape rounded_box(const Vec3& size, double r);
  static GroundTruthShape capsule(const Vec3& a, const Vec3& b, double r);
  static GroundTruthShape union_of(std::vector<GroundTruthShape> parts);
  static GroundTruthShape from_mesh(TriangleMesh mesh);
};

// Signed distance, negative inside.
double gt_sdf(const GroundTruthShape& shape, const Vec3& p);

// Outward unit normal by central differences (h = 1e-6 m).
Vec3 gt_normal(const GroundTruthShape& shape, const Vec3& p);

// Sphere tracing: max 256 steps, hit when sdf < 1e-6 m; nullopt on miss.
std::optional<double> raycast(const GroundTruthShape& shape, const Vec3& origin,
                              const Vec3& dir, double t_max);

}  // namespace vtsdf
