#include <doctest.h>

#include <numbers>

#include "synthbody/error.hpp"
#include "synthbody/fitter.hpp"
#include "synthbody/rotation.hpp"
#include "synthbody/serialization.hpp"
#include "synthbody/synth_engine.hpp"
#include "test_support.hpp"

using namespace synthbody;

namespace {

SynthContext default_context() {
  SynthContext ctx{KinematicTree::smpl_like(), Scene::defaults(), {}, {}};
  ctx.catalogs = Catalogs::defaults(ctx.tree);
  return ctx;
}

}  // namespace

TEST_CASE("default catalogs are valid") {
  const SynthContext ctx = default_context();
  CHECK_NOTHROW(ctx.catalogs.validate(ctx.tree));
  CHECK(ctx.catalogs.subjects.size() == 20);
  for (const auto& s : ctx.catalogs.subjects) CHECK(s.beta.vector().cwiseAbs().maxCoeff() <= 2.0);
  for (const auto& clip : ctx.catalogs.actions) {
    CHECK(clip.length() >= kMinClipFrames);
    CHECK(clip.length() <= kMaxClipFrames);
    CHECK(clip.fps == 30.0);
    for (int f = 1; f < clip.length(); ++f) {
      for (int j = 0; j < ctx.tree.joint_count(); ++j) {
        const double step = geodesic_angle(rodrigues(clip.frames[f - 1].joint(j)), rodrigues(clip.frames[f].joint(j)));
        CHECK(step < std::numbers::pi / 2);
      }
    }
  }
}

TEST_CASE("clip validation") {
  const KinematicTree tree = KinematicTree::smpl_like();
  CHECK_THROWS_AS(procedural_clip("short", tree.joint_count(), 20, 1).validate(tree.joint_count()), InvalidArgument);
  MotionClip clip = procedural_clip("ok", tree.joint_count(), 40, 1);
  CHECK_NOTHROW(clip.validate(tree.joint_count()));
  CHECK_THROWS_AS(clip.validate(10), InvalidArgument);
  Eigen::VectorXd jump = clip.frames[10].vector();
  jump.segment<3>(6) += Eigen::Vector3d(0, 2.0, 0);
  clip.frames[10] = PoseParams(jump);
  CHECK_THROWS_AS(clip.validate(tree.joint_count()), InvalidArgument);
}

TEST_CASE("scenario generation is deterministic") {
  const SynthContext ctx = default_context();
  CHECK(generate_scenario(5, ctx.catalogs) == generate_scenario(5, ctx.catalogs));
}

TEST_CASE("different seeds give different scenarios") {
  const SynthContext ctx = default_context();
  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK_FALSE(generate_scenario(2 * i + 1, ctx.catalogs) == generate_scenario(2 * i + 2, ctx.catalogs));
  }
}

TEST_CASE("singleton catalogs fix every index") {
  const SynthContext ctx = default_context();
  Catalogs one;
  one.subjects = {ctx.catalogs.subjects[3]};
  one.actions = {ctx.catalogs.actions[2]};
  one.locations = {ctx.catalogs.locations[1]};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ScenarioSpec s = generate_scenario(seed, one);
    CHECK(s.subject_id == 0);
    CHECK(s.action_id == 0);
    CHECK((s.location - one.locations[0].position).norm() == 0.0);
  }
  CHECK_THROWS_AS(generate_scenario(1, Catalogs{}), InvalidArgument);
}

TEST_CASE("noiseless sequences reproduce forward kinematics") {
  const SynthContext ctx = default_context();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SequenceData seq = synthesize_sequence(generate_scenario(seed, ctx.catalogs), ctx);
    REQUIRE(seq.ground_truth);
    CHECK(seq.frame_count() >= 30);
    CHECK(seq.frame_count() <= 80);
    CHECK(seq.joint_count == 24);
    const GroundTruth& gt = *seq.ground_truth;
    for (int f = 0; f < seq.frame_count(); ++f) {
      const Keypoints fk = forward_kinematics(gt.theta[f], gt.beta, gt.translation[f], ctx.tree);
      const FrameData& fr = seq.frames[f];
      REQUIRE(fr.keypoints_3d.cols() == 26);
      CHECK((fr.keypoints_3d.leftCols(24) - fk).cwiseAbs().maxCoeff() == 0.0);
      CHECK(fr.occlusion.size() == 26);
      CHECK(fr.keypoints_2d.cols() == 26);
      CHECK(loss_3d(fk, fr.keypoints_3d.leftCols(24), JointMask(24, true)) == 0.0);
    }
  }
}

TEST_CASE("empty scene labels every joint in front visible or self-occluded") {
  SynthContext ctx = default_context();
  ctx.scene.primitives.clear();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SequenceData seq = synthesize_sequence(generate_scenario(seed, ctx.catalogs), ctx);
    for (const FrameData& fr : seq.frames) {
      for (std::size_t k = 0; k < fr.occlusion.size(); ++k) {
        if (fr.in_front[k]) CHECK(fr.occlusion[k] != OcclusionLabel::Occluded);
      }
    }
  }
  // with no capsules either, everything is visible
  ctx.scene.radii.default_radius = 1e-9;
  const SequenceData seq = synthesize_sequence(generate_scenario(3, ctx.catalogs), ctx);
  for (const FrameData& fr : seq.frames) {
    for (auto label : fr.occlusion) CHECK(label == OcclusionLabel::Visible);
  }
}

TEST_CASE("synthesis is byte-for-byte deterministic") {
  const SynthContext ctx = default_context();
  const ScenarioSpec spec = generate_scenario(9, ctx.catalogs);
  CHECK(sequence_to_json(synthesize_sequence(spec, ctx)) == sequence_to_json(synthesize_sequence(spec, ctx)));
}

TEST_CASE("bad scenario ids are rejected") {
  const SynthContext ctx = default_context();
  ScenarioSpec spec = generate_scenario(1, ctx.catalogs);
  spec.subject_id = 1000;
  CHECK_THROWS_AS(synthesize_sequence(spec, ctx), InvalidArgument);
  spec = generate_scenario(1, ctx.catalogs);
  spec.action_id = -1;
  CHECK_THROWS_AS(synthesize_sequence(spec, ctx), InvalidArgument);
}

TEST_CASE("zero noise is the identity") {
  const SynthContext ctx = default_context();
  const SequenceData seq = synthesize_sequence(generate_scenario(4, ctx.catalogs), ctx);
  CHECK(sequence_to_json(add_noise(seq, 0.0, 17)) == sequence_to_json(seq));
  CHECK_THROWS_AS(add_noise(seq, -0.01, 17), InvalidArgument);
}

TEST_CASE("noise is gaussian with the requested sigma") {
  const SynthContext ctx = default_context();
  const SequenceData seq = synthesize_sequence(generate_scenario(4, ctx.catalogs), ctx);
  const double sigma = 0.01;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sum2 = Eigen::Vector3d::Zero();
  long n = 0;
  for (std::uint64_t s = 0; n < 100000; ++s) {
    const SequenceData noisy = add_noise(seq, sigma, s);
    for (int f = 0; f < seq.frame_count(); ++f) {
      const Keypoints d = noisy.frames[f].keypoints_3d - seq.frames[f].keypoints_3d;
      for (Eigen::Index k = 0; k < d.cols(); ++k) {
        sum += d.col(k);
        sum2 += d.col(k).cwiseAbs2();
        ++n;
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    const double mean = sum[a] / n;
    const double sd = std::sqrt(sum2[a] / n - mean * mean);
    CHECK(std::abs(sd - sigma) < 0.02 * sigma);
    CHECK(std::abs(mean) < 5.0 * sigma / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("noise is seeded and keeps ground truth") {
  const SynthContext ctx = default_context();
  const SequenceData seq = synthesize_sequence(generate_scenario(6, ctx.catalogs), ctx);
  const SequenceData a = add_noise(seq, 0.01, 5);
  const SequenceData b = add_noise(seq, 0.01, 5);
  const SequenceData c = add_noise(seq, 0.01, 6);
  CHECK(sequence_to_json(a) == sequence_to_json(b));
  CHECK(sequence_to_json(a) != sequence_to_json(c));
  REQUIRE(a.ground_truth);
  CHECK((a.ground_truth->beta.vector() - seq.ground_truth->beta.vector()).norm() == 0.0);
  // 2D keypoints follow the noisy 3D points
  const Projection p = project(a.frames[0].keypoints_3d, a.frames[0].camera);
  CHECK((p.pixels - a.frames[0].keypoints_2d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weather names round trip") {
  for (int i = 0; i < kWeatherCount; ++i) {
    const auto w = static_cast<Weather>(i);
    CHECK(weather_from_string(to_string(w)) == w);
  }
  CHECK_THROWS_AS(weather_from_string("hail"), InvalidArgument);
}
