#pragma once

#include <string>
#include <vector>

#include "synthbody/metrics.hpp"
#include "synthbody/synth_engine.hpp"

namespace synthbody {

/// Fixed-edge count histogram; values outside the edges go to `outside`.
struct CountHistogram {
  std::string name;
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t outside = 0;

  static CountHistogram with_edges(std::string name, std::vector<double> edges);
  void add(double value);
  std::size_t total() const;
};

struct DatasetStats {
  int sequences = 0;
  int frames = 0;
  int annotations = 0;
  CountHistogram yaw_deg;        // [0, 360), 36 bins
  CountHistogram elevation_deg;  // [-90, 90], 36 bins
  CountHistogram distance_m;     // [0, 12], 24 bins
  /// Per keypoint RMS distance (m) from its mean root-relative position.
  std::vector<double> pose_spread;
  double visible_rate = 0.0;        // over keypoints in front of the camera
  double occluded_rate = 0.0;
  double self_occluded_rate = 0.0;
  double out_of_frame_rate = 0.0;   // over all keypoints
  /// Per sequence annotation error against the stored 3D keypoints, binned.
  std::vector<BinReport> error_bins;
};

/// Summary of in-memory sequences; annotations[i] (optional, may be empty)
/// holds fitted keypoints for sequences[i].
DatasetStats compute_dataset_stats(const std::vector<SequenceData>& sequences,
                                   const std::vector<std::vector<Keypoints>>& annotations = {});

/// Scans dir recursively for sequence files and matching annotation files
/// (same sequence id). Missing or empty dir gives an empty summary.
DatasetStats dataset_stats(const std::string& dir);

std::string histogram_csv(const std::vector<CountHistogram>& histograms);
std::string summary_csv(const DatasetStats& stats);
std::string error_bins_csv(const std::vector<BinReport>& bins);
/// Bar chart of a histogram as a standalone SVG document.
std::string histogram_svg(const CountHistogram& histogram);

/// Writes summary.csv, histograms.csv, error_bins.csv and one SVG per camera histogram.
void write_dataset_stats(const DatasetStats& stats, const std::string& out_dir);

}  // namespace synthbody
