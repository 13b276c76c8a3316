#pragma once

#include <stdexcept>
#include <string>

namespace vtsdf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define VTSDF_ERROR_TYPE(NAME) \
  struct NAME : Error {        \
    using Error::Error;        \
  };

VTSDF_ERROR_TYPE(AngleNearPi)        // se3_log near the π singularity
VTSDF_ERROR_TYPE(NonWatertightMesh)  // mesh SDF construction on open mesh
VTSDF_ERROR_TYPE(EmptySet)           // aggregate op on an empty collection
VTSDF_ERROR_TYPE(InvalidParams)      // config / argument validation
VTSDF_ERROR_TYPE(NonFiniteGradient)  // optimizer fed a NaN/Inf gradient
VTSDF_ERROR_TYPE(FitDiverged)        // field baking lost a finite loss
VTSDF_ERROR_TYPE(EmptyMesh)          // metric asked on a mesh without faces
VTSDF_ERROR_TYPE(EmptySurface)       // isosurface extraction found no crossing
VTSDF_ERROR_TYPE(StampMismatch)      // trajectory comparison on unaligned stamps
VTSDF_ERROR_TYPE(PlaybackError)      // corrupt / truncated recorded sequence
VTSDF_ERROR_TYPE(IoError)            // file read/write failure

#undef VTSDF_ERROR_TYPE

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidParams(msg);
}

}  // namespace vtsdf
