#include "vtsdf/neural_field.hpp"

#include <cmath>
#include <cstring>

#include "vtsdf/errors.hpp"
#include "vtsdf/rng.hpp"

namespace vtsdf {
namespace {

constexpr double kBeta = 100.0;  // softplus sharpness
constexpr uint64_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

// softplus_beta(z) = log(1 + exp(beta z)) / beta, saturated for |beta z| > 35
inline double softplus(double z) {
  const double bz = kBeta * z;
  if (bz > 35.0) return z;
  if (bz < -35.0) return 0.0;
  return std::log1p(std::exp(bz)) / kBeta;
}

inline double sigmoid_beta(double z) {
  const double bz = kBeta * z;
  if (bz > 35.0) return 1.0;
  if (bz < -35.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-bz));
}

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;

// Layer l of the MLP as (rows x cols) with a bias vector appended after the
// weight block. Returns the offset of the weight block within params.values.
struct LayerView {
  size_t w_off, b_off;
  int rows, cols;
};

LayerView layer_view(const FieldParams& params, int layer) {
  const FieldConfig& c = params.cfg;
  size_t off = params.mlp_offset();
  for (int l = 0; l < layer; ++l) {
    const int rows = (l == c.mlp_layers - 1) ? 1 : c.mlp_width;
    const int cols = (l == 0) ? c.encoding_dim() : c.mlp_width;
    off += size_t(rows) * cols + rows;
  }
  const int rows = (layer == c.mlp_layers - 1) ? 1 : c.mlp_width;
  const int cols = (layer == 0) ? c.encoding_dim() : c.mlp_width;
  return {off, off + size_t(rows) * cols, rows, cols};
}

}  // namespace

size_t field_param_count(const FieldConfig& c) {
  size_t n = size_t(c.levels) * c.table_size * c.features_per_level;
  for (int l = 0; l < c.mlp_layers; ++l) {
    const int rows = (l == c.mlp_layers - 1) ? 1 : c.mlp_width;
    const int cols = (l == 0) ? c.encoding_dim() : c.mlp_width;
    n += size_t(rows) * cols + rows;
  }
  return n;
}

namespace {

inline uint32_t vertex_index(int vx, int vy, int vz, int res, bool dense,
                             int table_mask) {
  if (dense) {
    const int side = res + 1;
    return uint32_t(vx + side * (vy + side * vz));
  }
  const uint64_t h = uint64_t(vx) * kHashPrimes[0] ^
                     uint64_t(vy) * kHashPrimes[1] ^
                     uint64_t(vz) * kHashPrimes[2];
  return uint32_t(h & uint64_t(table_mask));
}

// Distance from an object-frame point to the bound box (0 if inside) and its
// gradient w.r.t. the point.
inline double bound_distance(const FieldConfig& c, const Vec3& p_obj,
                             Vec3* grad) {
  const Vec3 d = p_obj - c.bound_center;
  const double h = 0.5 * c.bound_side;
  const Vec3 ex = d.cwiseAbs() - Vec3::Constant(h);
  const Vec3 outside = ex.cwiseMax(0.0);
  const double dist = outside.norm();
  if (grad) {
    if (dist > 0.0) {
      Vec3 g = outside / dist;
      for (int k = 0; k < 3; ++k) g[k] *= (d[k] < 0.0) ? -1.0 : 1.0;
      *grad = g;
    } else {
      grad->setZero();
    }
  }
  return dist;
}

}  // namespace

int FieldConfig::level_resolution(int level) const {
  return int(std::floor(base_resolution * std::pow(growth_factor, level)));
}

void FieldConfig::validate() const {
  require(levels >= 1 && features_per_level >= 1, "field: bad level config");
  require(table_size >= 8 && (table_size & (table_size - 1)) == 0,
          "field: table_size must be a power of two");
  require(base_resolution >= 2 && growth_factor >= 1.0,
          "field: bad resolution schedule");
  require(mlp_layers >= 2 && mlp_width >= 2, "field: bad MLP shape");
  require(bound_side > 0.0 && truncation > 0.0, "field: bad bound/truncation");
}

bool FieldConfig::operator==(const FieldConfig& o) const {
  return levels == o.levels && features_per_level == o.features_per_level &&
         table_size == o.table_size && base_resolution == o.base_resolution &&
         growth_factor == o.growth_factor && mlp_layers == o.mlp_layers &&
         mlp_width == o.mlp_width && bound_side == o.bound_side &&
         bound_center == o.bound_center && truncation == o.truncation;
}

FieldParams field_init(const FieldConfig& cfg, uint64_t seed) {
  cfg.validate();
  FieldParams params;
  params.cfg = cfg;
  params.values.resize(field_param_count(cfg));
  Rng rng(seed);

  const size_t table_total = params.mlp_offset();
  for (size_t i = 0; i < table_total; ++i)
    params.values[i] = rng.uniform(-1e-4, 1e-4);

  for (int l = 0; l < cfg.mlp_layers; ++l) {
    const LayerView lv = layer_view(params, l);
    const double bound = std::sqrt(6.0 / lv.cols);  // Kaiming uniform
    for (size_t i = 0; i < size_t(lv.rows) * lv.cols; ++i)
      params.values[lv.w_off + i] = rng.uniform(-bound, bound);
    for (int i = 0; i < lv.rows; ++i) params.values[lv.b_off + i] = 0.0;
  }
  // Start the field at the free-space plateau: output bias +truncation with
  // near-zero output weights, so untrained space reads as empty.
  const LayerView last = layer_view(params, cfg.mlp_layers - 1);
  for (size_t i = 0; i < size_t(last.rows) * last.cols; ++i)
    params.values[last.w_off + i] *= 0.01;
  params.values[last.b_off] = cfg.truncation;
  return params;
}

void GradAccumulator::ensure(const FieldParams& params) {
  if (g.size() != params.values.size()) {
    g.assign(params.values.size(), 0.0);
    touched.clear();
    mlp_touched = false;
  }
}

void GradAccumulator::clear(const FieldParams& params) {
  if (g.empty()) return;
  for (uint32_t idx : touched) g[idx] = 0.0;
  touched.clear();
  if (mlp_touched) {
    std::memset(g.data() + params.mlp_offset(), 0,
                (g.size() - params.mlp_offset()) * sizeof(double));
    mlp_touched = false;
  }
}

const VecX& FieldBatch::forward(const FieldParams& params,
                                const Pose& object_pose,
                                const std::vector<Vec3>& pts_world) {
  const FieldConfig& c = params.cfg;
  c.validate();
  require(params.values.size() == field_param_count(c), "field: bad params size");
  n_ = int(pts_world.size());
  const int L = c.levels, F = c.features_per_level, E = c.encoding_dim();

  obj_rot_ = object_pose.rotation();
  const Pose world_to_obj = object_pose.inverse();
  const Mat3 r_inv = world_to_obj.rotation();

  oob_.assign(n_, 0);
  p_obj_.resize(n_);
  corner_idx_.resize(size_t(n_) * L * 8);
  frac_.resize(size_t(n_) * L * 3);
  enc_.resize(n_, E);
  value_.resize(n_);

  const double inv_side = 1.0 / c.bound_side;
  const Vec3 lo = c.bound_center - Vec3::Constant(0.5 * c.bound_side);
  const int mask = c.table_size - 1;

  for (int i = 0; i < n_; ++i) {
    const Vec3 p = r_inv * pts_world[i] + world_to_obj.t;
    p_obj_[i] = p;
    const Vec3 q = (p - lo) * inv_side;
    if (q.x() < 0.0 || q.x() > 1.0 || q.y() < 0.0 || q.y() > 1.0 ||
        q.z() < 0.0 || q.z() > 1.0) {
      oob_[i] = 1;
      enc_.row(i).setZero();
      continue;
    }
    for (int l = 0; l < L; ++l) {
      const int res = c.level_resolution(l);
      const bool dense = size_t(res + 1) * (res + 1) * (res + 1) <=
                         size_t(c.table_size);
      const uint32_t level_off = uint32_t(params.table_offset(l));
      double* fr = &frac_[(size_t(i) * L + l) * 3];
      uint32_t* ci = &corner_idx_[(size_t(i) * L + l) * 8];
      int cell[3];
      for (int k = 0; k < 3; ++k) {
        const double x = q[k] * res;
        int ix = int(std::floor(x));
        if (ix > res - 1) ix = res - 1;
        if (ix < 0) ix = 0;
        cell[k] = ix;
        fr[k] = x - ix;
      }
      double w[8];
      for (int corner = 0; corner < 8; ++corner) {
        const int ax = corner & 1, ay = (corner >> 1) & 1, az = corner >> 2;
        w[corner] = (ax ? fr[0] : 1.0 - fr[0]) * (ay ? fr[1] : 1.0 - fr[1]) *
                    (az ? fr[2] : 1.0 - fr[2]);
        const uint32_t entry = vertex_index(cell[0] + ax, cell[1] + ay,
                                            cell[2] + az, res, dense, mask);
        ci[corner] = level_off + entry * F;
      }
      for (int f = 0; f < F; ++f) {
        double acc = 0.0;
        for (int corner = 0; corner < 8; ++corner)
          acc += w[corner] * params.values[ci[corner] + f];
        enc_(i, l * F + f) = acc;
      }
    }
  }

  // MLP forward over all rows; out-of-bound rows carry zero encodings and are
  // overwritten below, but keeping them in the GEMM keeps the code simple.
  const LayerView l0 = layer_view(params, 0);
  const LayerView l1 = layer_view(params, 1);
  const LayerView l2 = layer_view(params, c.mlp_layers - 1);
  require(c.mlp_layers == 3, "field: only 3-layer MLP supported");
  RowMajorMap w0(params.values.data() + l0.w_off, l0.rows, l0.cols);
  RowMajorMap w1(params.values.data() + l1.w_off, l1.rows, l1.cols);
  RowMajorMap w2(params.values.data() + l2.w_off, l2.rows, l2.cols);
  Eigen::Map<const VecX> b0(params.values.data() + l0.b_off, l0.rows);
  Eigen::Map<const VecX> b1(params.values.data() + l1.b_off, l1.rows);
  const double b2 = params.values[l2.b_off];

  MatX z = enc_ * w0.transpose();
  z.rowwise() += b0.transpose();
  h_[0].resize(z.rows(), z.cols());
  sig_[0].resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    h_[0].data()[i] = softplus(z.data()[i]);
    sig_[0].data()[i] = sigmoid_beta(z.data()[i]);
  }
  z.noalias() = h_[0] * w1.transpose();
  z.rowwise() += b1.transpose();
  h_[1].resize(z.rows(), z.cols());
  sig_[1].resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    h_[1].data()[i] = softplus(z.data()[i]);
    sig_[1].data()[i] = sigmoid_beta(z.data()[i]);
  }
  value_ = h_[1] * w2.transpose().col(0);
  value_.array() += b2;

  for (int i = 0; i < n_; ++i)
    if (oob_[i]) value_[i] = bound_distance(c, p_obj_[i], nullptr) + c.truncation;
  return value_;
}

void FieldBatch::backward_params(const FieldParams& params,
                                 const VecX& upstream,
                                 GradAccumulator& acc) const {
  const FieldConfig& c = params.cfg;
  require(int(upstream.size()) == n_, "field: upstream size mismatch");
  acc.ensure(params);
  const int L = c.levels, F = c.features_per_level;

  VecX u = upstream;
  for (int i = 0; i < n_; ++i)
    if (oob_[i]) u[i] = 0.0;  // clamp branch has no parameter dependence

  const LayerView l0 = layer_view(params, 0);
  const LayerView l1 = layer_view(params, 1);
  const LayerView l2 = layer_view(params, c.mlp_layers - 1);
  RowMajorMap w0(params.values.data() + l0.w_off, l0.rows, l0.cols);
  RowMajorMap w1(params.values.data() + l1.w_off, l1.rows, l1.cols);
  RowMajorMap w2(params.values.data() + l2.w_off, l2.rows, l2.cols);

  RowMajorMutMap gw0(acc.g.data() + l0.w_off, l0.rows, l0.cols);
  RowMajorMutMap gw1(acc.g.data() + l1.w_off, l1.rows, l1.cols);
  RowMajorMutMap gw2(acc.g.data() + l2.w_off, l2.rows, l2.cols);
  Eigen::Map<VecX> gb0(acc.g.data() + l0.b_off, l0.rows);
  Eigen::Map<VecX> gb1(acc.g.data() + l1.b_off, l1.rows);

  acc.g[l2.b_off] += u.sum();
  gw2.row(0).noalias() += u.transpose() * h_[1];

  MatX dz = u * w2.row(0);  // n x width
  dz.array() *= sig_[1].array();
  gb1.noalias() += dz.colwise().sum().transpose();
  gw1.noalias() += dz.transpose() * h_[0];

  MatX dz0 = dz * w1;
  dz0.array() *= sig_[0].array();
  gb0.noalias() += dz0.colwise().sum().transpose();
  gw0.noalias() += dz0.transpose() * enc_;
  acc.mlp_touched = true;

  MatX de = dz0 * w0;  // n x enc_dim
  for (int i = 0; i < n_; ++i) {
    if (oob_[i] || u[i] == 0.0) continue;
    for (int l = 0; l < L; ++l) {
      const double* fr = &frac_[(size_t(i) * L + l) * 3];
      const uint32_t* ci = &corner_idx_[(size_t(i) * L + l) * 8];
      for (int corner = 0; corner < 8; ++corner) {
        const int ax = corner & 1, ay = (corner >> 1) & 1, az = corner >> 2;
        const double w = (ax ? fr[0] : 1.0 - fr[0]) *
                         (ay ? fr[1] : 1.0 - fr[1]) *
                         (az ? fr[2] : 1.0 - fr[2]);
        for (int f = 0; f < F; ++f) {
          const uint32_t idx = ci[corner] + f;
          if (acc.g[idx] == 0.0) acc.touched.push_back(idx);
          acc.g[idx] += w * de(i, l * F + f);
        }
      }
    }
  }
}

void FieldBatch::gradient_point(const FieldParams& params,
                                std::vector<Vec3>& grad_world) const {
  const FieldConfig& c = params.cfg;
  const int L = c.levels, F = c.features_per_level;
  grad_world.resize(n_);

  const LayerView l0 = layer_view(params, 0);
  const LayerView l1 = layer_view(params, 1);
  const LayerView l2 = layer_view(params, c.mlp_layers - 1);
  RowMajorMap w0(params.values.data() + l0.w_off, l0.rows, l0.cols);
  RowMajorMap w1(params.values.data() + l1.w_off, l1.rows, l1.cols);
  RowMajorMap w2(params.values.data() + l2.w_off, l2.rows, l2.cols);

  // dF/dEnc with unit upstream, reusing cached sigmoids.
  MatX dz = sig_[1].array().rowwise() * w2.row(0).array();
  MatX dz0 = dz * w1;
  dz0.array() *= sig_[0].array();
  MatX de = dz0 * w0;  // n x enc_dim

  const double inv_side = 1.0 / c.bound_side;
  for (int i = 0; i < n_; ++i) {
    if (oob_[i]) {
      Vec3 g_obj;
      bound_distance(c, p_obj_[i], &g_obj);
      grad_world[i] = obj_rot_ * g_obj;
      continue;
    }
    Vec3 g_q = Vec3::Zero();
    for (int l = 0; l < L; ++l) {
      const int res = c.level_resolution(l);
      const double* fr = &frac_[(size_t(i) * L + l) * 3];
      const uint32_t* ci = &corner_idx_[(size_t(i) * L + l) * 8];
      for (int f = 0; f < F; ++f) {
        const double up = de(i, l * F + f);
        if (up == 0.0) continue;
        Vec3 dfeat = Vec3::Zero();
        for (int corner = 0; corner < 8; ++corner) {
          const int ax = corner & 1, ay = (corner >> 1) & 1, az = corner >> 2;
          const double wx = ax ? fr[0] : 1.0 - fr[0];
          const double wy = ay ? fr[1] : 1.0 - fr[1];
          const double wz = az ? fr[2] : 1.0 - fr[2];
          const double theta = params.values[ci[corner] + f];
          dfeat.x() += (ax ? 1.0 : -1.0) * wy * wz * theta;
          dfeat.y() += (ay ? 1.0 : -1.0) * wx * wz * theta;
          dfeat.z() += (az ? 1.0 : -1.0) * wx * wy * theta;
        }
        g_q += up * res * dfeat;
      }
    }
    grad_world[i] = obj_rot_ * (g_q * inv_side);
  }
}

FieldEvalResult field_eval(const FieldParams& params, const Pose& object_pose,
                           const std::vector<Vec3>& pts_world) {
  FieldBatch batch;
  FieldEvalResult out;
  out.values = batch.forward(params, object_pose, pts_world);
  out.out_of_bound = batch.oob();
  return out;
}

std::vector<double> field_backward_params(const FieldParams& params,
                                          const Pose& object_pose,
                                          const std::vector<Vec3>& pts_world,
                                          const VecX& upstream) {
  FieldBatch batch;
  batch.forward(params, object_pose, pts_world);
  GradAccumulator acc;
  acc.ensure(params);
  batch.backward_params(params, upstream, acc);
  return acc.g;
}

FieldPointGradResult field_gradient_point(const FieldParams& params,
                                          const Pose& object_pose,
                                          const std::vector<Vec3>& pts_world) {
  FieldBatch batch;
  batch.forward(params, object_pose, pts_world);
  FieldPointGradResult out;
  batch.gradient_point(params, out.grad_world);
  out.out_of_bound = batch.oob();
  return out;
}

void NeuralDistanceField::eval(const Pose& object_pose,
                               const std::vector<Vec3>& pts_world, VecX& out,
                               std::vector<uint8_t>* oob) const {
  out = batch_.forward(*params_, object_pose, pts_world);
  if (oob) *oob = batch_.oob();
}

void NeuralDistanceField::eval_with_gradient(const Pose& object_pose,
                                             const std::vector<Vec3>& pts_world,
                                             VecX& out,
                                             std::vector<Vec3>& grad_world,
                                             std::vector<uint8_t>* oob) const {
  out = batch_.forward(*params_, object_pose, pts_world);
  batch_.gradient_point(*params_, grad_world);
  if (oob) *oob = batch_.oob();
}

void AnalyticDistanceField::eval(const Pose& object_pose,
                                 const std::vector<Vec3>& pts_world, VecX& out,
                                 std::vector<uint8_t>* oob) const {
  const Pose inv = object_pose.inverse();
  out.resize(pts_world.size());
  if (oob) oob->assign(pts_world.size(), 0);
  for (size_t i = 0; i < pts_world.size(); ++i)
    out[long(i)] = gt_sdf(shape_, inv * pts_world[i]);
}

void AnalyticDistanceField::eval_with_gradient(
    const Pose& object_pose, const std::vector<Vec3>& pts_world, VecX& out,
    std::vector<Vec3>& grad_world, std::vector<uint8_t>* oob) const {
  eval(object_pose, pts_world, out, oob);
  const Pose inv = object_pose.inverse();
  const Mat3 rot = object_pose.rotation();
  grad_world.resize(pts_world.size());
  for (size_t i = 0; i < pts_world.size(); ++i)
    grad_world[i] = rot * gt_normal(shape_, inv * pts_world[i]);
}

}  // namespace vtsdf
