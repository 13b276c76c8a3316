#include "vtsdf/field_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "vtsdf/errors.hpp"

namespace vtsdf {
namespace {

constexpr char kMagic[4] = {'V', 'T', 'S', 'F'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_field(const FieldParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(kMagic, 4);
  put<uint32_t>(os, kVersion);
  const FieldConfig& c = params.cfg;
  put<int32_t>(os, c.levels);
  put<int32_t>(os, c.features_per_level);
  put<int32_t>(os, c.table_size);
  put<int32_t>(os, c.base_resolution);
  put<double>(os, c.growth_factor);
  put<int32_t>(os, c.mlp_layers);
  put<int32_t>(os, c.mlp_width);
  put<double>(os, c.bound_side);
  put<double>(os, c.bound_center.x());
  put<double>(os, c.bound_center.y());
  put<double>(os, c.bound_center.z());
  put<double>(os, c.truncation);
  put<uint64_t>(os, params.values.size());
  std::vector<float> buf(params.values.begin(), params.values.end());
  os.write(reinterpret_cast<const char*>(buf.data()),
           std::streamsize(buf.size() * sizeof(float)));
  if (!os) throw IoError("short write: " + path);
}

FieldParams load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a field file: " + path);
  if (get<uint32_t>(is) != kVersion)
    throw IoError("unsupported field version: " + path);
  FieldParams params;
  FieldConfig& c = params.cfg;
  c.levels = get<int32_t>(is);
  c.features_per_level = get<int32_t>(is);
  c.table_size = get<int32_t>(is);
  c.base_resolution = get<int32_t>(is);
  c.growth_factor = get<double>(is);
  c.mlp_layers = get<int32_t>(is);
  c.mlp_width = get<int32_t>(is);
  c.bound_side = get<double>(is);
  c.bound_center.x() = get<double>(is);
  c.bound_center.y() = get<double>(is);
  c.bound_center.z() = get<double>(is);
  c.truncation = get<double>(is);
  c.validate();
  const uint64_t count = get<uint64_t>(is);
  std::vector<float> buf(count);
  is.read(reinterpret_cast<char*>(buf.data()),
          std::streamsize(count * sizeof(float)));
  if (!is) throw IoError("truncated field file: " + path);
  params.values.assign(buf.begin(), buf.end());
  require(field_param_count(c) == params.values.size(),
          "field file parameter count does not match its config");
  return params;
}

}  // namespace vtsdf
