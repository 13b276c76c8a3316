#include "vtsdf/shapes.hpp"

#include <cmath>

#include "vtsdf/errors.hpp"

namespace vtsdf {

// ---------------------------------------------------------------------------
// MeshSdf

namespace {
uint64_t edge_key(int u, int v) {
  uint64_t lo = std::min(u, v), hi = std::max(u, v);
  return (lo << 32) | hi;
}
}  // namespace

MeshSdf::MeshSdf(TriangleMesh mesh_in) : grid_([&] {
      if (!is_watertight(mesh_in))
        throw NonWatertightMesh("MeshSdf: mesh is not watertight");
      return MeshDistanceGrid(mesh_in);
    }()) {
  const TriangleMesh& m = grid_.mesh();
  face_normals_.resize(m.faces.size());
  vertex_normals_.assign(m.vertices.size(), Vec3::Zero());
  for (size_t t = 0; t < m.faces.size(); ++t) {
    const auto& f = m.faces[t];
    const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]],
               &c = m.vertices[f[2]];
    Vec3 n = (b - a).cross(c - a);
    double len = n.norm();
    face_normals_[t] = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
    // angle-weighted accumulation at each corner
    const Vec3* v[3] = {&a, &b, &c};
    for (int k = 0; k < 3; ++k) {
      Vec3 e1 = (*v[(k + 1) % 3] - *v[k]).normalized();
      Vec3 e2 = (*v[(k + 2) % 3] - *v[k]).normalized();
      double ang = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
      vertex_normals_[f[k]] += ang * face_normals_[t];
    }
    for (int k = 0; k < 3; ++k) {
      auto& en = edge_normals_[edge_key(f[k], f[(k + 1) % 3])];
      en += face_normals_[t];
    }
  }
  for (auto& n : vertex_normals_)
    if (n.norm() > 0) n.normalize();
  for (auto& [k, n] : edge_normals_)
    if (n.norm() > 0) n.normalize();
}

double MeshSdf::signed_distance(const Vec3& p) const {
  Vec3 closest;
  int tri = -1;
  double d = grid_.distance(p, &closest, &tri);
  const TriangleMesh& m = grid_.mesh();
  const auto& f = m.faces[tri];
  const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];

  // classify the closest feature via barycentric coordinates
  Vec3 v0 = b - a, v1 = c - a, v2 = closest - a;
  double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1);
  double d20 = v2.dot(v0), d21 = v2.dot(v1);
  double denom = d00 * d11 - d01 * d01;
  double v = denom > 0 ? (d11 * d20 - d01 * d21) / denom : 0;
  double w = denom > 0 ? (d00 * d21 - d01 * d20) / denom : 0;
  double u = 1.0 - v - w;

  const double eps = 1e-9;
  Vec3 n;
  if (u > eps && v > eps && w > eps) {
    n = face_normals_[tri];
  } else if (u <= eps && v <= eps) {
    n = vertex_normals_[f[2]];
  } else if (u <= eps && w <= eps) {
    n = vertex_normals_[f[1]];
  } else if (v <= eps && w <= eps) {
    n = vertex_normals_[f[0]];
  } else if (u <= eps) {
    n = edge_normals_.at(edge_key(f[1], f[2]));
  } else if (v <= eps) {
    n = edge_normals_.at(edge_key(f[0], f[2]));
  } else {
    n = edge_normals_.at(edge_key(f[0], f[1]));
  }
  return n.dot(p - closest) >= 0 ? d : -d;
}

// ---------------------------------------------------------------------------
// constructors

GroundTruthShape GroundTruthShape::sphere(double r) {
  require(r > 0, "sphere: radius must be positive");
  GroundTruthShape s;
  s.kind = Kind::Sphere;
  s.radius = r;
  return s;
}

GroundTruthShape GroundTruthShape::box(const Vec3& size) {
  require(size.minCoeff() > 0, "box: sides must be positive");
  GroundTruthShape s;
  s.kind = Kind::Box;
  s.half = size / 2;
  return s;
}

GroundTruthShape GroundTruthShape::rounded_box(const Vec3& size, double r) {
  require(r > 0 && size.minCoeff() > 2 * r, "rounded_box: need 0 < 2r < side");
  GroundTruthShape s;
  s.kind = Kind::RoundedBox;
  s.half = size / 2;
  s.radius = r;
  return s;
}

GroundTruthShape GroundTruthShape::capsule(const Vec3& a, const Vec3& b,
                                           double r) {
  require(r > 0, "capsule: radius must be positive");
  GroundTruthShape s;
  s.kind = Kind::Capsule;
  s.a = a;
  s.b = b;
  s.radius = r;
  return s;
}

GroundTruthShape GroundTruthShape::union_of(
    std::vector<GroundTruthShape> parts) {
  require(!parts.empty(), "union_of: no parts");
  GroundTruthShape s;
  s.kind = Kind::Union;
  s.children = std::move(parts);
  return s;
}

GroundTruthShape GroundTruthShape::from_mesh(TriangleMesh mesh) {
  GroundTruthShape s;
  s.kind = Kind::Mesh;
  s.mesh_sdf = std::make_shared<MeshSdf>(std::move(mesh));
  return s;
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

double sdf_box(const Vec3& p, const Vec3& half) {
  Vec3 q = p.cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

}  // namespace

double gt_sdf(const GroundTruthShape& shape, const Vec3& p) {
  switch (shape.kind) {
    case GroundTruthShape::Kind::Sphere:
      return p.norm() - shape.radius;
    case GroundTruthShape::Kind::Box:
      return sdf_box(p, shape.half);
    case GroundTruthShape::Kind::RoundedBox:
      return sdf_box(p, shape.half - Vec3::Constant(shape.radius)) -
             shape.radius;
    case GroundTruthShape::Kind::Capsule: {
      Vec3 pa = p - shape.a, ba = shape.b - shape.a;
      double bb = ba.squaredNorm();
      double h = bb > 0 ? std::clamp(pa.dot(ba) / bb, 0.0, 1.0) : 0.0;
      return (pa - ba * h).norm() - shape.radius;
    }
    case GroundTruthShape::Kind::Union: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : shape.children) best = std::min(best, gt_sdf(c, p));
      return best;
    }
    case GroundTruthShape::Kind::Mesh:
      return shape.mesh_sdf->signed_distance(p);
  }
  return 0;
}

Vec3 gt_normal(const GroundTruthShape& shape, const Vec3& p) {
  const double h = 1e-6;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 dp = Vec3::Zero();
    dp[k] = h;
    g[k] = gt_sdf(shape, p + dp) - gt_sdf(shape, p - dp);
  }
  double len = g.norm();
  return len > 0 ? Vec3(g / len) : Vec3::UnitZ();
}

std::optional<double> raycast(const GroundTruthShape& shape, const Vec3& origin,
                              const Vec3& dir, double t_max) {
  double t = 0;
  for (int step = 0; step < 256; ++step) {
    double s = gt_sdf(shape, origin + t * dir);
    if (s < 1e-6) return t;
    t += s;
    if (t > t_max) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace vtsdf
