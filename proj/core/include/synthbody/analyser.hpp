#pragma once

#include <set>
#include <string_view>
#include <vector>

#include "synthbody/synth_engine.hpp"

namespace synthbody {

enum class QualityIssue { Stationary, SevereOcclusion, OutOfView };

std::string_view to_string(QualityIssue issue);
QualityIssue quality_issue_from_string(std::string_view s);

/// Quality-gate cutoffs. A sequence fails when its mean joint speed is below
/// min_mean_speed, or a fraction above the maxima is occluded / out of frame.
struct Thresholds {
  double min_mean_speed = 0.005;      // m/frame
  double max_occluded_fraction = 0.6;
  double max_out_of_frame_fraction = 0.3;

  void validate() const;
};

struct QualityReport {
  bool pass = true;
  std::set<QualityIssue> reasons;
  double mean_speed = 0.0;              // m/frame
  double occluded_fraction = 0.0;       // keypoints labeled Occluded by the environment
  double out_of_frame_fraction = 0.0;   // keypoints outside the image or behind the camera
};

struct JointSpeed {
  std::vector<double> per_frame;  // entry t-1 holds the speed between frames t-1 and t
  double mean = 0.0;
};

/// Mean keypoint displacement between consecutive frames. Throws for fewer than 2 frames.
JointSpeed joint_speed(const SequenceData& seq);

QualityReport quality_gate(const SequenceData& seq, const Thresholds& thresholds = {});

}  // namespace synthbody
