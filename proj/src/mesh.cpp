#include "vtsdf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "vtsdf/errors.hpp"

namespace vtsdf {

// ---------------------------------------------------------------------------
// basic measures

double mesh_area(const TriangleMesh& mesh) {
  double area = 0;
  for (const auto& f : mesh.faces) {
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]],
               &c = mesh.vertices[f[2]];
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

double mesh_volume(const TriangleMesh& mesh) {
  double vol = 0;
  for (const auto& f : mesh.faces) {
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]],
               &c = mesh.vertices[f[2]];
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) return false;
  // key: undirected edge; value: directed use counts (lo->hi, hi->lo)
  std::unordered_map<uint64_t, std::pair<int, int>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int u = f[k], v = f[(k + 1) % 3];
      if (u == v) return false;
      uint64_t lo = std::min(u, v), hi = std::max(u, v);
      auto& c = edges[(lo << 32) | hi];
      (u < v ? c.first : c.second)++;
    }
  }
  for (const auto& [key, c] : edges)
    if (c.first != 1 || c.second != 1) return false;
  return true;
}

// ---------------------------------------------------------------------------
// closest point on triangle (region classification)

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

  double denom = va + vb + vc;
  if (!(std::abs(denom) > 0)) return a;  // degenerate face
  return a + ab * (vb / denom) + ac * (vc / denom);
}

// ---------------------------------------------------------------------------
// uniform grids

namespace {

struct GridFrame {
  Vec3 origin;
  double cell;
  int dims[3];
};

GridFrame fit_grid(const Vec3& lo, const Vec3& hi, double cell, int max_dim) {
  GridFrame g;
  Vec3 extent = hi - lo;
  double max_extent = std::max({extent.x(), extent.y(), extent.z(), 1e-6});
  if (cell <= 0) cell = max_extent / max_dim;
  cell = std::max(cell, max_extent / max_dim);
  g.cell = cell;
  g.origin = lo - Vec3::Constant(0.5 * cell);
  for (int k = 0; k < 3; ++k)
    g.dims[k] = std::max(1, int(std::floor(extent[k] / cell)) + 2);
  return g;
}

inline int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

// Cell coordinate of p, unclamped (so ring lower bounds stay valid) but kept
// finite: queries far outside a tiny grid would otherwise overflow int.
inline void cell_coord(const Vec3& p, const Vec3& origin, double cell,
                       int pc[3]) {
  for (int k = 0; k < 3; ++k)
    pc[k] = int(std::clamp(std::floor((p[k] - origin[k]) / cell), -2e9, 2e9));
}

// First Chebyshev ring around pc that can intersect the grid at all.
inline int first_ring(const int pc[3], const int dims[3]) {
  int r0 = 0;
  for (int k = 0; k < 3; ++k) {
    r0 = std::max(r0, -pc[k]);
    r0 = std::max(r0, pc[k] - (dims[k] - 1));
  }
  return r0;
}

}  // namespace

MeshDistanceGrid::MeshDistanceGrid(const TriangleMesh& mesh, double cell)
    : mesh_(mesh) {
  require(!mesh.faces.empty(), "MeshDistanceGrid: empty mesh");
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  GridFrame g = fit_grid(lo, hi, cell, 48);
  origin_ = g.origin;
  cell_ = g.cell;
  for (int k = 0; k < 3; ++k) dims_[k] = g.dims[k];
  bins_.assign(size_t(dims_[0]) * dims_[1] * dims_[2], {});

  for (int t = 0; t < int(mesh.faces.size()); ++t) {
    const auto& f = mesh.faces[t];
    Vec3 tlo = mesh.vertices[f[0]].cwiseMin(mesh.vertices[f[1]]).cwiseMin(
        mesh.vertices[f[2]]);
    Vec3 thi = mesh.vertices[f[0]].cwiseMax(mesh.vertices[f[1]]).cwiseMax(
        mesh.vertices[f[2]]);
    int c0[3], c1[3];
    for (int k = 0; k < 3; ++k) {
      c0[k] = clampi(int(std::floor((tlo[k] - origin_[k]) / cell_)), 0,
                     dims_[k] - 1);
      c1[k] = clampi(int(std::floor((thi[k] - origin_[k]) / cell_)), 0,
                     dims_[k] - 1);
    }
    for (int z = c0[2]; z <= c1[2]; ++z)
      for (int y = c0[1]; y <= c1[1]; ++y)
        for (int x = c0[0]; x <= c1[0]; ++x)
          bins_[cell_index(x, y, z)].push_back(t);
  }
}

double MeshDistanceGrid::distance(const Vec3& p, Vec3* closest,
                                  int* tri) const {
  int pc[3];
  cell_coord(p, origin_, cell_, pc);

  double best2 = std::numeric_limits<double>::infinity();
  Vec3 best_pt = Vec3::Zero();
  int best_tri = -1;

  int max_ring = 0;
  for (int k = 0; k < 3; ++k)
    max_ring = std::max({max_ring, std::abs(pc[k] - 0) + 1,
                         std::abs(dims_[k] - 1 - pc[k]) + 1});

  for (int r = first_ring(pc, dims_); r <= max_ring; ++r) {
    double ring_lb = (r - 1) * cell_;  // min distance to any ring-r cell
    if (best2 <= ring_lb * ring_lb) break;
    for (int z = std::max(pc[2] - r, 0); z <= std::min(pc[2] + r, dims_[2] - 1);
         ++z) {
      for (int y = std::max(pc[1] - r, 0);
           y <= std::min(pc[1] + r, dims_[1] - 1); ++y) {
        for (int x = std::max(pc[0] - r, 0);
             x <= std::min(pc[0] + r, dims_[0] - 1); ++x) {
          int cheb = std::max({std::abs(x - pc[0]), std::abs(y - pc[1]),
                               std::abs(z - pc[2])});
          if (cheb != r) continue;  // only the shell
          for (int t : bins_[cell_index(x, y, z)]) {
            const auto& f = mesh_.faces[t];
            Vec3 q = closest_point_on_triangle(p, mesh_.vertices[f[0]],
                                               mesh_.vertices[f[1]],
                                               mesh_.vertices[f[2]]);
            double d2 = (q - p).squaredNorm();
            if (d2 < best2) {
              best2 = d2;
              best_pt = q;
              best_tri = t;
            }
          }
        }
      }
    }
  }
  if (closest) *closest = best_pt;
  if (tri) *tri = best_tri;
  return std::sqrt(best2);
}

PointGrid::PointGrid(const std::vector<Vec3>& pts, double cell) : pts_(pts) {
  require(!pts.empty(), "PointGrid: empty point set");
  Vec3 lo = pts[0], hi = pts[0];
  for (const Vec3& v : pts) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  GridFrame g = fit_grid(lo, hi, cell, 48);
  origin_ = g.origin;
  cell_ = g.cell;
  for (int k = 0; k < 3; ++k) dims_[k] = g.dims[k];
  bins_.assign(size_t(dims_[0]) * dims_[1] * dims_[2], {});
  for (int i = 0; i < int(pts.size()); ++i) {
    int c[3];
    for (int k = 0; k < 3; ++k)
      c[k] = clampi(int(std::floor((pts[i][k] - origin_[k]) / cell_)), 0,
                    dims_[k] - 1);
    bins_[cell_index(c[0], c[1], c[2])].push_back(i);
  }
}

double PointGrid::nn_distance(const Vec3& p, int* index) const {
  int pc[3];
  cell_coord(p, origin_, cell_, pc);

  double best2 = std::numeric_limits<double>::infinity();
  int best = -1;
  int max_ring = 0;
  for (int k = 0; k < 3; ++k)
    max_ring = std::max({max_ring, std::abs(pc[k]) + 1,
                         std::abs(dims_[k] - 1 - pc[k]) + 1});

  for (int r = first_ring(pc, dims_); r <= max_ring; ++r) {
    double ring_lb = (r - 1) * cell_;
    if (best2 <= ring_lb * ring_lb) break;
    for (int z = std::max(pc[2] - r, 0); z <= std::min(pc[2] + r, dims_[2] - 1);
         ++z) {
      for (int y = std::max(pc[1] - r, 0);
           y <= std::min(pc[1] + r, dims_[1] - 1); ++y) {
        for (int x = std::max(pc[0] - r, 0);
             x <= std::min(pc[0] + r, dims_[0] - 1); ++x) {
          int cheb = std::max({std::abs(x - pc[0]), std::abs(y - pc[1]),
                               std::abs(z - pc[2])});
          if (cheb != r) continue;
          for (int i : bins_[cell_index(x, y, z)]) {
            double d2 = (pts_[i] - p).squaredNorm();
            if (d2 < best2) {
              best2 = d2;
              best = i;
            }
          }
        }
      }
    }
  }
  if (index) *index = best;
  return std::sqrt(best2);
}

// ---------------------------------------------------------------------------
// sampling

std::vector<Vec3> sample_mesh_points(const TriangleMesh& mesh, int n,
                                     Rng& rng) {
  require(!mesh.faces.empty(), "sample_mesh_points: empty mesh");
  std::vector<double> cum(mesh.faces.size());
  double total = 0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    total += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                       .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                       .norm();
    cum[i] = total;
  }
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    size_t fi = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (fi >= mesh.faces.size()) fi = mesh.faces.size() - 1;
    const auto& f = mesh.faces[fi];
    double su = std::sqrt(rng.uniform()), v = rng.uniform();
    out.push_back(mesh.vertices[f[0]] * (1.0 - su) +
                  mesh.vertices[f[1]] * (su * (1.0 - v)) +
                  mesh.vertices[f[2]] * (su * v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// procedural meshes

TriangleMesh make_box_mesh(const Vec3& size, const Vec3& center) {
  Vec3 h = size / 2;
  TriangleMesh m;
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x)
        m.vertices.push_back(center + Vec3((2 * x - 1) * h.x(),
                                           (2 * y - 1) * h.y(),
                                           (2 * z - 1) * h.z()));
  // vertex i = x + 2y + 4z; two triangles per face, outward winding
  const int quads[6][4] = {
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
  };
  for (const auto& q : quads) {
    m.faces.emplace_back(q[0], q[1], q[2]);
    m.faces.emplace_back(q[0], q[2], q[3]);
  }
  return m;
}

TriangleMesh make_icosphere(double radius, int subdivisions,
                            const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Eigen::Vector3i> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = int(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriangleMesh m;
  m.vertices.reserve(verts.size());
  for (const Vec3& v : verts) m.vertices.push_back(center + radius * v);
  m.faces = std::move(faces);
  return m;
}

// ---------------------------------------------------------------------------
// PLY / OBJ io

void save_ply(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_ply: cannot open " + path);
  f << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << mesh.vertices.size() << "\n"
    << "property float x\nproperty float y\nproperty float z\n"
    << "element face " << mesh.faces.size() << "\n"
    << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices) {
    float xyz[3] = {float(v.x()), float(v.y()), float(v.z())};
    f.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& face : mesh.faces) {
    unsigned char n = 3;
    int32_t idx[3] = {face[0], face[1], face[2]};
    f.write(reinterpret_cast<const char*>(&n), 1);
    f.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!f) throw IoError("save_ply: write failed for " + path);
}

namespace {

struct PlyProperty {
  std::string type;  // scalar type, or list index type for lists
  std::string name;
  bool is_list = false;
  std::string count_type;
};

size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" ||
      t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw IoError("ply: unknown type " + t);
}

double read_binary_scalar(std::istream& in, const std::string& t) {
  char buf[8];
  size_t n = type_size(t);
  in.read(buf, n);
  if (!in) throw IoError("ply: truncated binary payload");
  if (t == "char" || t == "int8") return *reinterpret_cast<int8_t*>(buf);
  if (t == "uchar" || t == "uint8") return *reinterpret_cast<uint8_t*>(buf);
  if (t == "short" || t == "int16") return *reinterpret_cast<int16_t*>(buf);
  if (t == "ushort" || t == "uint16") return *reinterpret_cast<uint16_t*>(buf);
  if (t == "int" || t == "int32") return *reinterpret_cast<int32_t*>(buf);
  if (t == "uint" || t == "uint32") return *reinterpret_cast<uint32_t*>(buf);
  if (t == "float" || t == "float32") return *reinterpret_cast<float*>(buf);
  return *reinterpret_cast<double*>(buf);
}

TriangleMesh load_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_ply: cannot open " + path);
  std::string line;
  std::getline(f, line);
  if (line.rfind("ply", 0) != 0) throw IoError("load_ply: not a ply file");

  bool binary = false;
  struct Element {
    std::string name;
    size_t count = 0;
    std::vector<PlyProperty> props;
  };
  std::vector<Element> elements;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment") continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian")
        binary = true;
      else if (fmt != "ascii")
        throw IoError("load_ply: unsupported format " + fmt);
    } else if (tok == "element") {
      Element e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (tok == "property") {
      PlyProperty p;
      std::string t;
      ss >> t;
      if (t == "list") {
        p.is_list = true;
        ss >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ss >> p.name;
      }
      if (elements.empty()) throw IoError("load_ply: property before element");
      elements.back().props.push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }

  TriangleMesh mesh;
  auto read_scalar = [&](const std::string& t) -> double {
    if (binary) return read_binary_scalar(f, t);
    double v;
    f >> v;
    if (!f) throw IoError("ply: truncated ascii payload");
    return v;
  };

  for (const auto& e : elements) {
    if (e.name == "vertex") {
      mesh.vertices.reserve(e.count);
      for (size_t i = 0; i < e.count; ++i) {
        Vec3 v = Vec3::Zero();
        for (const auto& p : e.props) {
          double val = read_scalar(p.type);
          if (p.name == "x") v.x() = val;
          else if (p.name == "y") v.y() = val;
          else if (p.name == "z") v.z() = val;
        }
        mesh.vertices.push_back(v);
      }
    } else if (e.name == "face") {
      mesh.faces.reserve(e.count);
      for (size_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.props) {
          if (!p.is_list) {
            read_scalar(p.type);
            continue;
          }
          int n = int(read_scalar(p.count_type));
          std::vector<int> idx(n);
          for (int k = 0; k < n; ++k) idx[k] = int(read_scalar(p.type));
          for (int k = 2; k < n; ++k)
            mesh.faces.emplace_back(idx[0], idx[k - 1], idx[k]);
        }
      }
    } else {
      // skip unknown element payload
      for (size_t i = 0; i < e.count; ++i)
        for (const auto& p : e.props) {
          if (p.is_list) {
            int n = int(read_scalar(p.count_type));
            for (int k = 0; k < n; ++k) read_scalar(p.type);
          } else {
            read_scalar(p.type);
          }
        }
    }
  }
  return mesh;
}

TriangleMesh load_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_obj: cannot open " + path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      mesh.vertices.push_back(v);
    } else if (tok == "f") {
      std::vector<int> idx;
      std::string vert;
      while (ss >> vert) {
        size_t slash = vert.find('/');
        int i = std::stoi(slash == std::string::npos ? vert
                                                     : vert.substr(0, slash));
        idx.push_back(i > 0 ? i - 1 : int(mesh.vertices.size()) + i);
      }
      for (size_t k = 2; k < idx.size(); ++k)
        mesh.faces.emplace_back(idx[0], idx[k - 1], idx[k]);
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh load_mesh(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = char(std::tolower(c));
  if (ext == "ply") return load_ply(path);
  if (ext == "obj") return load_obj(path);
  throw IoError("load_mesh: unsupported extension ." + ext);
}

}  // namespace vtsdf
