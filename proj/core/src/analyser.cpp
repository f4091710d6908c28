#include "synthbody/analyser.hpp"

#include <cmath>
#include <string>

#include "synthbody/error.hpp"

namespace synthbody {

std::string_view to_string(QualityIssue issue) {
  switch (issue) {
    case QualityIssue::Stationary: return "stationary";
    case QualityIssue::SevereOcclusion: return "severe_occlusion";
    case QualityIssue::OutOfView: return "out_of_view";
  }
  return "stationary";
}

QualityIssue quality_issue_from_string(std::string_view s) {
  if (s == "stationary") return QualityIssue::Stationary;
  if (s == "severe_occlusion") return QualityIssue::SevereOcclusion;
  if (s == "out_of_view") return QualityIssue::OutOfView;
  throw InvalidArgument("unknown quality issue '" + std::string(s) + "'");
}

void Thresholds::validate() const {
  // Infinite speed cutoffs are allowed (forces every sequence to fail).
  if (std::isnan(min_mean_speed) || min_mean_speed < 0.0) {
    throw InvalidArgument("minimum speed must be >= 0");
  }
  if (!(max_occluded_fraction >= 0.0 && max_occluded_fraction <= 1.0) ||
      !(max_out_of_frame_fraction >= 0.0 && max_out_of_frame_fraction <= 1.0)) {
    throw InvalidArgument("fraction thresholds must lie in [0, 1]");
  }
}

JointSpeed joint_speed(const SequenceData& seq) {
  if (seq.frame_count() < 2) throw InvalidArgument("joint speed needs at least two frames");
  JointSpeed out;
  out.per_frame.reserve(seq.frame_count() - 1);
  double total = 0.0;
  for (int t = 1; t < seq.frame_count(); ++t) {
    const Keypoints& a = seq.frames[t - 1].keypoints_3d;
    const Keypoints& b = seq.frames[t].keypoints_3d;
    if (a.cols() != b.cols() || a.cols() == 0) throw InvalidArgument("keypoint counts differ between frames");
    const double speed = (b - a).colwise().norm().mean();
    out.per_frame.push_back(speed);
    total += speed;
  }
  out.mean = total / static_cast<double>(out.per_frame.size());
  return out;
}

QualityReport quality_gate(const SequenceData& seq, const Thresholds& thresholds) {
  thresholds.validate();
  QualityReport report;
  report.mean_speed = seq.frame_count() >= 2 ? joint_speed(seq).mean : 0.0;

  std::size_t total = 0, occluded = 0, outside = 0;
  for (const FrameData& frame : seq.frames) {
    for (std::size_t k = 0; k < frame.occlusion.size(); ++k) {
      ++total;
      if (frame.occlusion[k] == OcclusionLabel::Occluded) ++occluded;
      const bool in_view = k < frame.in_frame.size() && frame.in_frame[k] && frame.in_front[k];
      if (!in_view) ++outside;
    }
  }
  if (total > 0) {
    report.occluded_fraction = static_cast<double>(occluded) / total;
    report.out_of_frame_fraction = static_cast<double>(outside) / total;
  }
  if (report.mean_speed < thresholds.min_mean_speed) report.reasons.insert(QualityIssue::Stationary);
  if (report.occluded_fraction > thresholds.max_occluded_fraction) {
    report.reasons.insert(QualityIssue::SevereOcclusion);
  }
  if (report.out_of_frame_fraction > thresholds.max_out_of_frame_fraction) {
    report.reasons.insert(QualityIssue::OutOfView);
  }
  report.pass = report.reasons.empty();
  return report;
}

}  // namespace synthbody
