#pragma once

#include <string>
#include <vector>

#include "vtsdf/sensor_sim.hpp"

namespace vtsdf {

// One multi-sensor timestep of a recorded run: the true object pose plus a
// frame per live sensor.
struct SequenceStep {
  double stamp = 0;
  Pose object_pose;
  std::vector<SensorFrame> frames;
};

// Depth counts per meter in the on-disk container: 1 mm steps for vision,
// 1 um for tactile (whose whole range is 20 mm; millimeter steps would bury
// the gel's 0.05 mm noise floor).
double container_depth_scale(const SensorModel& sensor);

// Round a depth map onto the container grid: count 0 marks invalid, counts
// clamp at 65535. Frames written by record_sequence and returned by
// playback_sequence are fixed points of this map, so any pipeline that snaps
// its rendered frames sees bit-identical data live and from disk.
void snap_to_container(SensorFrame& frame);
void snap_to_container(std::vector<SequenceStep>& steps);

// Writes manifest.json (sensors with intrinsics, stamps, poses as 7-tuples
// qw qx qy qz tx ty tz) plus per-frame 16-bit PGM depth / scene-depth maps
// and 1-bit PBM masks. Stamps must be strictly increasing and finite.
// Depth is snapped to the container grid as it is encoded.
void record_sequence(const std::string& dir,
                     const std::vector<SequenceStep>& steps,
                     const std::string& name = "sequence");

// Inverse of record_sequence. Throws PlaybackError naming the step index on
// a missing/truncated frame file, non-monotone stamps, or a bad manifest.
std::vector<SequenceStep> playback_sequence(const std::string& dir);

}  // namespace vtsdf
