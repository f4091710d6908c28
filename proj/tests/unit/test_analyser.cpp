#include <doctest.h>

#include <limits>

#include "analyser_cases.hpp"
#include "synthbody/analyser.hpp"
#include "synthbody/error.hpp"
#include "test_support.hpp"

using namespace synthbody;
using testsupport::CaseOptions;
using testsupport::constructed_sequence;

TEST_CASE("speed of a static sequence is zero") {
  CaseOptions o;
  o.step = 0.0;
  const JointSpeed s = joint_speed(constructed_sequence(o));
  CHECK(s.mean == 0.0);
  CHECK(s.per_frame.size() == 39);
}

TEST_CASE("speed of a rigid translation is the step") {
  CaseOptions o;
  o.step = 0.013;
  const JointSpeed s = joint_speed(constructed_sequence(o));
  CHECK(s.mean == doctest::Approx(0.013).epsilon(1e-12));
  for (double v : s.per_frame) CHECK(v == doctest::Approx(0.013).epsilon(1e-12));
}

TEST_CASE("speed matches the per-pair oracle") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    SequenceData seq = constructed_sequence({});
    for (auto& f : seq.frames) {
      f.keypoints_3d = Keypoints::NullaryExpr(3, 26, [&] { return uniform(rng, -1, 1); });
    }
    double total = 0.0;
    for (int t = 1; t < seq.frame_count(); ++t) {
      double frame = 0.0;
      for (int k = 0; k < 26; ++k) {
        const Eigen::Vector3d d = seq.frames[t].keypoints_3d.col(k) - seq.frames[t - 1].keypoints_3d.col(k);
        frame += std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
      }
      total += frame / 26.0;
    }
    CHECK(std::abs(joint_speed(seq).mean - total / (seq.frame_count() - 1)) < 1e-12);
  }
}

TEST_CASE("clean sequence passes") {
  const QualityReport r = quality_gate(constructed_sequence({}));
  CHECK(r.pass);
  CHECK(r.reasons.empty());
  CHECK(r.occluded_fraction == 0.0);
  CHECK(r.out_of_frame_fraction == 0.0);
}

TEST_CASE("each defect maps to exactly its reason") {
  CaseOptions still;
  still.step = 0.0;
  CHECK(quality_gate(constructed_sequence(still)).reasons == std::set<QualityIssue>{QualityIssue::Stationary});

  CaseOptions hidden;
  hidden.label = OcclusionLabel::Occluded;
  const QualityReport h = quality_gate(constructed_sequence(hidden));
  CHECK(h.reasons == std::set<QualityIssue>{QualityIssue::SevereOcclusion});
  CHECK(h.occluded_fraction == 1.0);

  CaseOptions away;
  away.in_frame = false;
  CHECK(quality_gate(constructed_sequence(away)).reasons == std::set<QualityIssue>{QualityIssue::OutOfView});

  CaseOptions behind;
  behind.in_front = false;
  behind.in_frame = false;
  CHECK(quality_gate(constructed_sequence(behind)).reasons == std::set<QualityIssue>{QualityIssue::OutOfView});

  CaseOptions all = still;
  all.label = OcclusionLabel::Occluded;
  all.in_frame = false;
  const QualityReport a = quality_gate(constructed_sequence(all));
  CHECK_FALSE(a.pass);
  CHECK(a.reasons.size() == 3);
}

TEST_CASE("self-occlusion is not a defect") {
  CaseOptions o;
  o.label = OcclusionLabel::SelfOccluded;
  CHECK(quality_gate(constructed_sequence(o)).pass);
}

TEST_CASE("threshold boundaries") {
  CaseOptions o;
  o.keypoints = 10;
  SequenceData seq = constructed_sequence(o);
  // 6 of 10 occluded sits exactly on the limit and passes; 7 of 10 fails
  for (auto& f : seq.frames) {
    for (int k = 0; k < 10; ++k) f.occlusion[k] = k < 6 ? OcclusionLabel::Occluded : OcclusionLabel::Visible;
  }
  CHECK(quality_gate(seq).pass);
  for (auto& f : seq.frames) f.occlusion[6] = OcclusionLabel::Occluded;
  CHECK(quality_gate(seq).reasons == std::set<QualityIssue>{QualityIssue::SevereOcclusion});

  // 3 of 10 out of view passes, 4 of 10 fails
  seq = constructed_sequence(o);
  for (auto& f : seq.frames) f.in_frame[0] = f.in_frame[1] = f.in_frame[2] = false;
  CHECK(quality_gate(seq).pass);
  for (auto& f : seq.frames) f.in_frame[3] = false;
  CHECK(quality_gate(seq).reasons == std::set<QualityIssue>{QualityIssue::OutOfView});

  Thresholds t;
  t.min_mean_speed = std::numeric_limits<double>::infinity();
  CHECK(quality_gate(constructed_sequence({}), t).reasons == std::set<QualityIssue>{QualityIssue::Stationary});
}

TEST_CASE("invalid thresholds") {
  Thresholds t;
  t.max_occluded_fraction = 1.5;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  t = Thresholds{};
  t.min_mean_speed = -1.0;
  CHECK_THROWS_AS(quality_gate(constructed_sequence({}), t), InvalidArgument);
}

TEST_CASE("issue names round trip") {
  for (auto i : {QualityIssue::Stationary, QualityIssue::SevereOcclusion, QualityIssue::OutOfView}) {
    CHECK(quality_issue_from_string(to_string(i)) == i);
  }
  CHECK_THROWS_AS(quality_issue_from_string("blurry"), InvalidArgument);
}
