#pragma once

#include "synthbody/analyser.hpp"
#include "synthbody/synth_engine.hpp"

namespace testsupport {

struct CaseOptions {
  int frames = 40;
  int keypoints = 26;
  double step = 0.02;  // m per frame along x
  synthbody::OcclusionLabel label = synthbody::OcclusionLabel::Visible;
  bool in_frame = true;
  bool in_front = true;
};

// Hand-built sequence: a cloud of keypoints translating rigidly along x with
// uniform labels and visibility flags.
inline synthbody::SequenceData constructed_sequence(const CaseOptions& o) {
  using namespace synthbody;
  SequenceData seq;
  seq.spec.sequence_id = "constructed";
  seq.joint_count = o.keypoints - 2;
  const Camera cam(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -5), Intrinsics{});
  Keypoints base(3, o.keypoints);
  for (int k = 0; k < o.keypoints; ++k) base.col(k) << 0.05 * (k % 5), 0.1 * (k / 5), 0.02 * k;
  for (int f = 0; f < o.frames; ++f) {
    FrameData frame{base.colwise() + Eigen::Vector3d(o.step * f, 0, 0),
                    Eigen::Matrix2Xd::Zero(2, o.keypoints),
                    std::vector<bool>(o.keypoints, o.in_frame),
                    std::vector<bool>(o.keypoints, o.in_front),
                    std::vector<OcclusionLabel>(o.keypoints, o.label),
                    cam};
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace testsupport
