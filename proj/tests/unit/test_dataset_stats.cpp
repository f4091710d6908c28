#include <doctest.h>

#include <filesystem>
#include <numbers>

#include "analyser_cases.hpp"
#include "synthbody/dataset_stats.hpp"
#include "synthbody/error.hpp"
#include "synthbody/serialization.hpp"
#include "test_support.hpp"

using namespace synthbody;
namespace fs = std::filesystem;

namespace {

std::size_t nonzero_bins(const CountHistogram& h) {
  std::size_t n = 0;
  for (auto c : h.counts) n += c > 0;
  return n;
}

// Pearson statistic over the bins [first, last) against a uniform expectation.
double chi_square(const CountHistogram& h, std::size_t first, std::size_t last) {
  double total = 0.0;
  for (std::size_t b = first; b < last; ++b) total += static_cast<double>(h.counts[b]);
  const double expected = total / static_cast<double>(last - first);
  double chi2 = 0.0;
  for (std::size_t b = first; b < last; ++b) {
    const double d = static_cast<double>(h.counts[b]) - expected;
    chi2 += d * d / expected;
  }
  return chi2;
}

SequenceData placed(const CameraPlacement& p) {
  SequenceData s;
  s.camera_placement = p;
  return s;
}

}  // namespace

TEST_CASE("count histogram") {
  CountHistogram h = CountHistogram::with_edges("x", {0.0, 1.0, 2.0});
  h.add(0.0);
  h.add(0.99);
  h.add(1.0);
  h.add(2.0);  // closed upper edge
  h.add(-0.1);
  h.add(7.0);
  CHECK(h.counts == std::vector<std::size_t>{2, 2});
  CHECK(h.outside == 2);
  CHECK(h.total() == 6);
}

TEST_CASE("missing or empty directory gives empty stats") {
  testsupport::TempDir dir("stats_empty");
  const DatasetStats a = dataset_stats(dir.str());
  CHECK(a.sequences == 0);
  CHECK(a.frames == 0);
  CHECK(a.yaw_deg.total() == 0);
  const DatasetStats b = dataset_stats(dir.file("does_not_exist"));
  CHECK(b.sequences == 0);
  CHECK_NOTHROW(write_dataset_stats(a, dir.file("report")));
  CHECK(fs::exists(dir.file("report/summary.csv")));
  CHECK(fs::exists(dir.file("report/camera_yaw_deg.svg")));
}

TEST_CASE("point-mass camera fills a single bin") {
  std::vector<SequenceData> seqs;
  CameraDistribution dist;
  dist.yaw = Histogram1D::point(0.7);
  dist.elevation = Histogram1D::point(0.2);
  dist.distance = Histogram1D::point(3.3);
  for (int i = 0; i < 50; ++i) seqs.push_back(placed(sample_placement(dist, i)));
  const DatasetStats st = compute_dataset_stats(seqs);
  CHECK(nonzero_bins(st.yaw_deg) == 1);
  CHECK(nonzero_bins(st.elevation_deg) == 1);
  CHECK(nonzero_bins(st.distance_m) == 1);
  CHECK(st.yaw_deg.total() == 50);
}

TEST_CASE("camera histograms follow the sampler") {
  const CameraDistribution dist;
  std::vector<SequenceData> seqs;
  for (int i = 0; i < 1000; ++i) seqs.push_back(placed(sample_placement(dist, derive_seed(31337, i))));
  const DatasetStats st = compute_dataset_stats(seqs);
  CHECK(st.yaw_deg.outside == 0);
  // 99.9% chi-square quantiles for 35, 17 and 7 degrees of freedom
  CHECK(chi_square(st.yaw_deg, 0, 36) < 66.62);
  // elevation -30..60 deg is bins 12..29 of the 5-degree grid
  CHECK(chi_square(st.elevation_deg, 12, 30) < 40.79);
  for (std::size_t b = 0; b < 36; ++b) {
    if (b < 12 || b >= 30) CHECK(st.elevation_deg.counts[b] == 0);
  }
  // distance 2..6 m is bins 4..11 of the 0.5 m grid
  CHECK(chi_square(st.distance_m, 4, 12) < 24.32);
  CHECK(nonzero_bins(st.distance_m) == 8);
}

TEST_CASE("label rates") {
  testsupport::CaseOptions o;
  o.keypoints = 10;
  SequenceData seq = testsupport::constructed_sequence(o);
  for (auto& f : seq.frames) {
    f.occlusion[0] = OcclusionLabel::Occluded;
    f.occlusion[1] = OcclusionLabel::SelfOccluded;
    f.occlusion[2] = OcclusionLabel::SelfOccluded;
    f.in_front[9] = false;
    f.in_frame[9] = false;
    f.in_frame[8] = false;
  }
  const DatasetStats st = compute_dataset_stats({seq});
  CHECK(st.occluded_rate == doctest::Approx(1.0 / 9.0));
  CHECK(st.self_occluded_rate == doctest::Approx(2.0 / 9.0));
  CHECK(st.visible_rate == doctest::Approx(6.0 / 9.0));
  CHECK(st.out_of_frame_rate == doctest::Approx(0.2));
  CHECK(st.frames == 40);
  // rigid translation: every keypoint keeps its root-relative position
  REQUIRE(st.pose_spread.size() == 10);
  for (double s : st.pose_spread) CHECK(s < 1e-6);
}

TEST_CASE("perfect annotations land in zero-error bins") {
  SequenceData seq = testsupport::constructed_sequence({});
  seq.camera_placement.distance = 3.2;
  std::vector<Keypoints> fitted;
  for (const auto& f : seq.frames) fitted.push_back(f.keypoints_3d);
  const DatasetStats st = compute_dataset_stats({seq}, {fitted});
  CHECK(st.annotations == 1);
  REQUIRE(st.error_bins.size() == 3);
  CHECK(st.error_bins[0].counts[3] == 1);
  CHECK(st.error_bins[0].mean_error[3] == 0.0);
  CHECK_THROWS_AS(compute_dataset_stats({seq}, {fitted, fitted}), InvalidArgument);
}

TEST_CASE("directory scan matches in-memory stats") {
  testsupport::TempDir dir("stats_scan");
  std::vector<SequenceData> seqs;
  for (int i = 0; i < 3; ++i) {
    testsupport::CaseOptions o;
    o.step = 0.01 * (i + 1);
    SequenceData s = testsupport::constructed_sequence(o);
    s.spec.sequence_id = "s" + std::to_string(i);
    s.camera_placement = sample_placement(CameraDistribution{}, i);
    save_sequence(dir.file("sequences/" + s.spec.sequence_id + ".json"), s);
    seqs.push_back(s);
  }
  write_text_file(dir.file("notes.json"), "[1, 2, 3]");
  const DatasetStats a = dataset_stats(dir.str());
  const DatasetStats b = compute_dataset_stats(seqs);
  CHECK(a.sequences == 3);
  CHECK(summary_csv(a) == summary_csv(b));
  CHECK(histogram_csv({a.yaw_deg, a.distance_m}) == histogram_csv({b.yaw_deg, b.distance_m}));
}

TEST_CASE("csv and svg output") {
  CountHistogram h = CountHistogram::with_edges("d", {0.0, 1.0, 2.0});
  h.add(0.5);
  const std::string csv = histogram_csv({h});
  CHECK(csv.find("factor,bin_lo,bin_hi,count") == 0);
  CHECK(csv.find("d,0,1,1") != std::string::npos);
  const std::string svg = histogram_svg(h);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}
