#include "sketchplay/trajectory.hpp"

#include "support.hpp"

#include <cmath>
#include <numbers>

namespace sketchplay::trajectory {
namespace {

using testing::Gen;

std::string keypoint_line(double t, const Vec3& tip, int count = 21) {
  std::string line = "{\"t\":" + std::to_string(t) + ",\"points\":[";
  for (int k = 0; k < count; ++k) {
    const Vec3 p = k == 8 ? tip : Vec3(0.01 * k, 0.0, 0.0);
    if (k) line += ",";
    line += "[" + std::to_string(p.x()) + "," + std::to_string(p.y()) + "," + std::to_string(p.z()) + "]";
  }
  return line + "]}\n";
}

Stroke two_points(const Vec3& a, double ta, const Vec3& b, double tb) { return Stroke{{{ta, a}, {tb, b}}}; }

TEST(KeypointStream, EmptyStreamGivesNoFrames) {
  EXPECT_TRUE(ingest_keypoint_stream("").empty());
  EXPECT_TRUE(ingest_keypoint_stream("\n  \n").empty());
}

TEST(KeypointStream, PreservesOrderAndCount) {
  const auto frames =
      ingest_keypoint_stream(keypoint_line(0.0, Vec3(0, 0, 0)) + keypoint_line(0.033, Vec3(0.1, 0, 0)));
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_DOUBLE_EQ(frames[0].t, 0.0);
  EXPECT_DOUBLE_EQ(frames[1].t, 0.033);
  EXPECT_DOUBLE_EQ(frames[1].points[8].x(), 0.1);
}

TEST(KeypointStream, RejectsWrongPointCount) {
  EXPECT_ERROR_CODE(ingest_keypoint_stream(keypoint_line(0.0, Vec3::Zero(), 20)), ErrorCode::MalformedRecord);
}

TEST(KeypointStream, RejectsBadJsonAndRepeatedTime) {
  EXPECT_ERROR_CODE(ingest_keypoint_stream("{not json}\n"), ErrorCode::MalformedRecord);
  EXPECT_ERROR_CODE(ingest_keypoint_stream(keypoint_line(0.5, Vec3::Zero()) + keypoint_line(0.5, Vec3::Zero())),
                    ErrorCode::NonMonotonicTime);
  EXPECT_ERROR_CODE(ingest_keypoint_stream(keypoint_line(0.5, Vec3::Zero()) + keypoint_line(0.4, Vec3::Zero())),
                    ErrorCode::NonMonotonicTime);
}

TEST(StrokeStream, ReadsPlanarPoints) {
  const Stroke s = ingest_stroke_stream("{\"t\":0,\"x\":1,\"y\":2}\n\n{\"t\":0.5,\"x\":3,\"y\":4}\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.points[1].pos, Vec3(3, 4, 0));
  EXPECT_ERROR_CODE(ingest_stroke_stream("{\"t\":0,\"x\":1}\n"), ErrorCode::MalformedRecord);
}

TEST(FingertipStroke, ConstantFramesGiveConstantStroke) {
  const auto frames = ingest_keypoint_stream(keypoint_line(0.0, Vec3(0.2, 0.3, 0.4)) +
                                             keypoint_line(0.1, Vec3(0.2, 0.3, 0.4)) +
                                             keypoint_line(0.2, Vec3(0.2, 0.3, 0.4)));
  const Stroke s = extract_fingertip_stroke(frames, 8);
  ASSERT_EQ(s.size(), 3u);
  for (const auto& p : s.points) EXPECT_EQ(p.pos, frames[0].points[8]);
}

TEST(FingertipStroke, TracksTheChosenKeypoint) {
  const auto frames = ingest_keypoint_stream(keypoint_line(0.0, Vec3(0, 0, 0)) + keypoint_line(1.0, Vec3(1, 0, 0)));
  const Stroke s = extract_fingertip_stroke(frames);
  EXPECT_EQ(s.points[0].pos, Vec3(0, 0, 0));
  EXPECT_EQ(s.points[1].pos, Vec3(1, 0, 0));
  EXPECT_EQ(extract_fingertip_stroke(frames, 3).points[1].pos, Vec3(0.03, 0, 0));
}

TEST(FingertipStroke, BoundsAndFrameCount) {
  const auto frames = ingest_keypoint_stream(keypoint_line(0.0, Vec3::Zero()) + keypoint_line(1.0, Vec3::Zero()));
  EXPECT_ERROR_CODE(extract_fingertip_stroke(frames, 21), ErrorCode::IndexOutOfRange);
  EXPECT_ERROR_CODE(extract_fingertip_stroke({frames[0]}, 8), ErrorCode::TooFewFrames);
}

TEST(Resample, LinearMotionAtTwoHertz) {
  const Stroke s = resample_stroke(two_points(Vec3(0, 0, 0), 0.0, Vec3(1, 0, 0), 1.0), 2.0);
  ASSERT_EQ(s.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(s.points[i].t, 0.5 * i);
    EXPECT_DOUBLE_EQ(s.points[i].pos.x(), 0.5 * i);
  }
}

TEST(Resample, NativeRateIsIdentity) {
  const Stroke in = testing::sample_path([](double t) { return Vec3(std::sin(t), t * t, 0.0); }, 60.0, 1.0);
  const Stroke out = resample_stroke(in, 60.0);
  EXPECT_EQ(out.points, in.points);
}

TEST(Resample, KeepsEndpointsWhenRateDoesNotDivide) {
  const Stroke in = two_points(Vec3(0, 0, 0), 0.0, Vec3(1, 2, 0), 1.0);
  const Stroke out = resample_stroke(in, 3.0 / 0.9);
  EXPECT_EQ(out.points.front(), in.points.front());
  EXPECT_EQ(out.points.back(), in.points.back());
}

TEST(Resample, RejectsShortStrokeAndBadRate) {
  EXPECT_ERROR_CODE(resample_stroke(Stroke{{{0.0, Vec3::Zero()}}}, 60.0), ErrorCode::TooFewPoints);
  EXPECT_ERROR_CODE(resample_stroke(two_points(Vec3::Zero(), 0, Vec3::Ones(), 1), 0.0), ErrorCode::ParameterOutOfRange);
}

TEST(Kinematics, ThreeFourFiveTriangle) {
  const auto k = estimate_kinematics(two_points(Vec3(0, 0, 0), 0.0, Vec3(0.3, 0.4, 0), 0.1));
  ASSERT_EQ(k.size(), 2u);
  for (const auto& s : k) {
    EXPECT_NEAR(s.velocity.x(), 3.0, 1e-12);
    EXPECT_NEAR(s.velocity.y(), 4.0, 1e-12);
    EXPECT_NEAR(s.speed, 5.0, 1e-12);
    EXPECT_NEAR(s.direction.x(), 0.6, 1e-12);
    EXPECT_NEAR(s.direction.y(), 0.8, 1e-12);
    EXPECT_FALSE(s.stationary);
  }
}

TEST(Kinematics, IdenticalPointsAreStationary) {
  const auto k = estimate_kinematics(two_points(Vec3(1, 1, 1), 0.0, Vec3(1, 1, 1), 0.1));
  for (const auto& s : k) {
    EXPECT_EQ(s.speed, 0.0);
    EXPECT_TRUE(s.stationary);
    EXPECT_EQ(s.direction, Vec3::Zero());
  }
}

TEST(Kinematics, BackwardVelocityForwardTangent) {
  // x = t^2 at t = 0, 0.5, 1: backward velocities 1, 1, 3 (first copies the
  // forward difference); forward tangents all +x.
  const Stroke s{{{0.0, Vec3(0, 0, 0)}, {0.5, Vec3(0.25, 0, 0)}, {1.0, Vec3(1, 0, 0)}}};
  const auto k = estimate_kinematics(s);
  EXPECT_DOUBLE_EQ(k[0].velocity.x(), 0.5);
  EXPECT_DOUBLE_EQ(k[1].velocity.x(), 0.5);
  EXPECT_DOUBLE_EQ(k[2].velocity.x(), 1.5);
  for (const auto& x : k) EXPECT_EQ(x.direction, Vec3::UnitX());
}

TEST(Kinematics, CentralSchemeIsExactForQuadratics) {
  const Stroke s = testing::sample_path([](double t) { return Vec3(t * t, 0, 0); }, 128.0, 1.0);
  const auto k = estimate_kinematics(s, {DifferenceScheme::Central, std::nullopt});
  for (std::size_t i = 1; i + 1 < k.size(); ++i) EXPECT_DOUBLE_EQ(k[i].velocity.x(), 2.0 * k[i].t);
}

TEST(Kinematics, SmoothingFollowsTheRecursion) {
  const Stroke s{{{0.0, Vec3(0, 0, 0)}, {1.0, Vec3(1, 0, 0)}, {2.0, Vec3(4, 0, 0)}, {3.0, Vec3(4, 0, 0)}}};
  const auto raw = estimate_kinematics(s);
  const auto smooth = estimate_kinematics(s, {DifferenceScheme::BackwardVelocityForwardTangent, 0.5});
  double expected = raw[0].velocity.x();
  for (std::size_t i = 1; i < raw.size(); ++i) {
    expected = 0.5 * raw[i].velocity.x() + 0.5 * expected;
    EXPECT_DOUBLE_EQ(smooth[i].velocity.x(), expected);
  }
  const auto identity = estimate_kinematics(s, {DifferenceScheme::BackwardVelocityForwardTangent, 1.0});
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(identity[i].velocity, raw[i].velocity);
}

TEST(Kinematics, CircleSpeedMatchesAnalyticRate) {
  const double r = 0.2, w = 2.0 * std::numbers::pi;
  const Stroke s =
      testing::sample_path([&](double t) { return Vec3(r * std::cos(w * t), r * std::sin(w * t), 0); }, 120.0, 1.0);
  const auto k = estimate_kinematics(s);
  for (std::size_t i = 1; i + 1 < k.size(); ++i) EXPECT_NEAR(k[i].speed, r * w, 0.02 * r * w);
}

TEST(Kinematics, Errors) {
  EXPECT_ERROR_CODE(estimate_kinematics(Stroke{{{0.0, Vec3::Zero()}}}), ErrorCode::TooFewPoints);
  EXPECT_ERROR_CODE(estimate_kinematics(two_points(Vec3::Zero(), 0.0, Vec3::Ones(), 5e-10)),
                    ErrorCode::DegenerateTimestep);
  EXPECT_ERROR_CODE(estimate_kinematics(two_points(Vec3::Zero(), 1.0, Vec3::Ones(), 0.5)),
                    ErrorCode::NonMonotonicTime);
  EXPECT_ERROR_CODE(estimate_kinematics(two_points(Vec3::Zero(), 0.0, Vec3::Ones(), 1.0),
                                        {DifferenceScheme::Central, 1.5}),
                    ErrorCode::ParameterOutOfRange);
}

TEST(KinematicsProperty, TranslationLeavesVelocitiesUnchanged) {
  for (int trial = 0; trial < 200; ++trial) {
    Gen gen(testing::seed_for(trial));
    const Stroke s = gen.dyadic_stroke(gen.integer(2, 40));
    const Vec3 shift(gen.dyadic(-4, 4), gen.dyadic(-4, 4), gen.dyadic(-4, 4));
    Stroke moved = s;
    for (auto& p : moved.points) p.pos += shift;
    const auto a = estimate_kinematics(s);
    const auto b = estimate_kinematics(moved);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i].velocity, b[i].velocity) << "trial " << trial;
  }
}

TEST(KinematicsProperty, ScalingScalesSpeedsExactly) {
  for (int trial = 0; trial < 200; ++trial) {
    Gen gen(testing::seed_for(trial));
    const Stroke s = gen.dyadic_stroke(gen.integer(2, 40));
    const double scale = std::ldexp(1.0, gen.integer(-4, 4));
    Stroke scaled = s;
    for (auto& p : scaled.points) p.pos *= scale;
    const auto a = estimate_kinematics(s);
    const auto b = estimate_kinematics(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(b[i].speed, scale * a[i].speed) << "trial " << trial;
      ASSERT_EQ(b[i].direction, a[i].direction) << "trial " << trial;
    }
  }
}

TEST(KinematicsProperty, DirectionsAreUnitOrFlagged) {
  for (int trial = 0; trial < 200; ++trial) {
    Gen gen(testing::seed_for(trial));
    Stroke s = gen.dyadic_stroke(gen.integer(2, 30));
    // Inject repeats so the stationary branch is exercised.
    if (s.size() > 3) s.points[2].pos = s.points[1].pos;
    for (const auto& k : estimate_kinematics(s)) {
      if (k.stationary) {
        EXPECT_EQ(k.direction, Vec3::Zero());
      } else {
        EXPECT_NEAR(k.direction.norm(), 1.0, 1e-9);
      }
    }
  }
}

TEST(KinematicsProperty, NativeResampleReproducesSamplesBitwise) {
  for (int trial = 0; trial < 50; ++trial) {
    Gen gen(testing::seed_for(trial));
    const double rate = 128.0;
    Stroke s;
    Vec3 p = gen.vec(-1, 1);
    for (int i = 0; i < gen.integer(2, 60); ++i) {
      s.points.push_back({i / rate, p});
      p += gen.vec(-0.01, 0.01);
    }
    const auto a = estimate_kinematics(s);
    const auto b = estimate_kinematics(resample_stroke(s, rate));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(a[i].velocity, b[i].velocity);
      ASSERT_EQ(a[i].direction, b[i].direction);
    }
  }
}

TEST(Summary, ConstantVelocity) {
  const Stroke s = testing::sample_path([](double t) { return Vec3(0.5 * t, -0.25 * t, 0); }, 64.0, 1.0);
  const auto g = summarize_gesture(estimate_kinematics(s), 0.2);
  EXPECT_NEAR(g.release_velocity.x(), 0.5, 1e-12);
  EXPECT_NEAR(g.release_velocity.y(), -0.25, 1e-12);
  EXPECT_NEAR(g.mean_speed, std::hypot(0.5, 0.25), 1e-12);
  EXPECT_NEAR(g.duration, 1.0, 1e-12);
  EXPECT_TRUE(g.direction_defined);
}

TEST(Summary, AllStationary) {
  const auto g = summarize_gesture(estimate_kinematics(two_points(Vec3::Ones(), 0, Vec3::Ones(), 1)), 0.1);
  EXPECT_EQ(g.release_velocity, Vec3::Zero());
  EXPECT_FALSE(g.direction_defined);
  EXPECT_EQ(g.principal_direction, Vec3::Zero());
}

TEST(Summary, RampReleaseSpeedIsWindowMean) {
  // Speed ramps 0 -> 2 m/s over 1 s (x = t^2). The mean over the final 0.2 s
  // is (x(1) - x(0.8)) / 0.2 = 1.8 m/s.
  const Stroke s = testing::sample_path([](double t) { return Vec3(t * t, 0, 0); }, 120.0, 1.0);
  const auto g = summarize_gesture(estimate_kinematics(s), 0.2);
  EXPECT_NEAR(g.release_velocity.norm(), 1.8, 1e-9);
  EXPECT_NEAR(g.mean_speed, 1.0, 1e-9);
  EXPECT_LE(g.mean_speed, g.peak_speed);
}

TEST(Summary, Errors) {
  EXPECT_ERROR_CODE(summarize_gesture({}, 0.1), ErrorCode::EmptyInput);
  const auto k = estimate_kinematics(two_points(Vec3::Zero(), 0, Vec3::Ones(), 1));
  EXPECT_ERROR_CODE(summarize_gesture(k, 0.0), ErrorCode::ParameterOutOfRange);
}

TEST(SummaryProperty, MeanNeverExceedsPeak) {
  for (int trial = 0; trial < 300; ++trial) {
    Gen gen(testing::seed_for(trial));
    const auto g = summarize_gesture(estimate_kinematics(gen.dyadic_stroke(gen.integer(2, 50))),
                                     gen.uniform(0.001, 0.5));
    ASSERT_GE(g.mean_speed, 0.0);
    ASSERT_LE(g.mean_speed, g.peak_speed);
    ASSERT_GT(g.duration, 0.0);
    if (g.direction_defined) ASSERT_NEAR(g.principal_direction.norm(), 1.0, 1e-9);
  }
}

}  // namespace
}  // namespace sketchplay::trajectory
