#include <catch2/catch.hpp>

#include "splatrack/kalman.hpp"
#include "splatrack/rng.hpp"
#include "support/oracles.hpp"

using namespace splatrack;

TEST_CASE("predict: uniform motion, control input, covariance growth") {
  NoiseConfig zero_noise;
  zero_noise.sigma_ds_sq = 0.0;
  zero_noise.sigma_v_sq = 0.0;

  const auto [x1, p1] = predict(MotionState{0, 1}, StateCovariance::Zero(), 0.0, 1.0,
                                zero_noise);
  CHECK(x1.displacement == Approx(1.0));
  CHECK(x1.velocity == Approx(1.0));

  const auto [x2, p2] =
      predict(MotionState{0, 0}, StateCovariance::Zero(), 2.0, 1.0, zero_noise);
  CHECK(x2.displacement == Approx(1.0));  // a dt^2 / 2
  CHECK(x2.velocity == Approx(2.0));      // a dt

  const auto [x3, p3] =
      predict(MotionState{0, 0}, StateCovariance::Identity(), 0.0, 1.0, zero_noise);
  Mat2 expected;
  expected << 2, 1, 1, 1;  // F I F^T
  CHECK(p3.isApprox(expected, 1e-15));

  CHECK_THROWS_AS(predict(MotionState{}, StateCovariance::Identity(), 0.0, 0.0,
                          zero_noise),
                  InvalidInputError);
}

TEST_CASE("gain limit cases") {
  NoiseConfig noise;
  noise.sigma_flow_sq = 0.5;
  noise.sigma_learn_sq = 0.25;

  // huge prior displacement variance: posterior ~ inverse-variance mean
  StateCovariance p = StateCovariance::Zero();
  p(0, 0) = 1e9;
  const Mat2 k = gain(p, noise);
  // closed-form: K row 0 = [p*sl, p*sf] / det with det = p(sf+sl)+sf*sl
  const double det = 1e9 * (0.5 + 0.25) + 0.5 * 0.25;
  CHECK(k(0, 0) == Approx(1e9 * 0.25 / det).epsilon(1e-9));
  CHECK(k(0, 1) == Approx(1e9 * 0.5 / det).epsilon(1e-9));
  CHECK(k(0, 0) + k(0, 1) == Approx(1.0).epsilon(1e-6));
  // weights match inverse variance: flow column / learn column = sl/sf
  CHECK(k(0, 0) / k(0, 1) == Approx(noise.sigma_learn_sq / noise.sigma_flow_sq));

  // infinitely noisy flow sensor is ignored
  NoiseConfig huge_flow = noise;
  huge_flow.sigma_flow_sq = 1e18;
  const Mat2 k2 = gain(StateCovariance::Identity(), huge_flow);
  CHECK(std::abs(k2(0, 0)) < 1e-9);
  CHECK(std::abs(k2(1, 0)) < 1e-9);

  // perfect prior ignores observations
  const Mat2 k3 = gain(StateCovariance::Zero(), noise);
  CHECK(k3.isZero(1e-15));

  // both observation variances zero with zero prior: singular
  NoiseConfig degenerate;
  degenerate.sigma_flow_sq = 0.0;
  degenerate.sigma_learn_sq = 0.0;
  CHECK_THROWS_AS(gain(StateCovariance::Zero(), degenerate), SingularMatrixError);
}

TEST_CASE("update: zero innovation, exact sensor, symmetric cancellation") {
  NoiseConfig noise;
  StateCovariance p = StateCovariance::Identity();

  // observations agreeing with the prediction leave the state unchanged
  MotionState x{0.3, -0.1};
  const auto [x_same, p_same] = update(x, p, ObservationPair{0.3, 0.3}, noise);
  CHECK(x_same.displacement == Approx(0.3));
  CHECK(x_same.velocity == Approx(-0.1));

  // exact flow sensor pins the posterior displacement
  NoiseConfig exact;
  exact.sigma_flow_sq = 0.0;
  exact.sigma_learn_sq = 1e12;
  const auto [x_exact, p_exact] = update(MotionState{0, 0}, p,
                                         ObservationPair{0.42, -5.0}, exact);
  CHECK(x_exact.displacement == Approx(0.42).margin(1e-9));

  // symmetric innovations cancel: P11 = 1, both R = 1, z = (2, 0), X- = (1, 0)
  NoiseConfig unit;
  unit.sigma_flow_sq = 1.0;
  unit.sigma_learn_sq = 1.0;
  StateCovariance p_unit = StateCovariance::Zero();
  p_unit(0, 0) = 1.0;
  const auto [x_sym, p_sym] =
      update(MotionState{1, 0}, p_unit, ObservationPair{2.0, 0.0}, unit);
  CHECK(x_sym.displacement == Approx(1.0));
}

TEST_CASE("covariance stays symmetric positive semidefinite through cycles") {
  Rng rng(23);
  NoiseConfig noise;
  noise.sigma_ds_sq = 1e-4;
  noise.sigma_v_sq = 1e-3;
  noise.sigma_flow_sq = 0.01;
  noise.sigma_learn_sq = 0.002;

  MotionState x{0, 0};
  StateCovariance p = StateCovariance::Identity();
  for (int step = 0; step < 200; ++step) {
    const double a = rng.uniform(-10, 10);
    auto [xp, pp] = predict(x, p, a, 0.05, noise);
    auto [xu, pu] = update(xp, pp, ObservationPair{rng.gaussian(), rng.gaussian()}, noise);
    x = xu;
    p = pu;
    CHECK(std::abs(p(0, 1) - p(1, 0)) < 1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat2> eig(p);
    CHECK(eig.eigenvalues()(0) > -1e-9);
  }
}

TEST_CASE("filter matches the batch weighted-least-squares oracle") {
  Rng rng(29);
  int passes = 0;
  for (int sequence = 0; sequence < 50; ++sequence) {
    NoiseConfig noise;
    noise.sigma_ds_sq = rng.uniform(1e-4, 1e-2);
    noise.sigma_v_sq = rng.uniform(1e-4, 1e-2);
    noise.sigma_flow_sq = rng.uniform(1e-4, 1e-1);
    noise.sigma_learn_sq = rng.uniform(1e-4, 1e-1);
    const double dt = rng.uniform(0.02, 0.5);
    const int steps = 1 + static_cast<int>(rng.next_u64() % 10);

    const Eigen::Vector2d x0(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Mat2 p0 = Mat2::Zero();
    p0(0, 0) = rng.uniform(0.01, 1.0);
    p0(1, 1) = rng.uniform(0.01, 1.0);

    MotionState x{x0(0), x0(1)};
    StateCovariance p = p0;
    std::vector<oracles::BatchStep> history;
    for (int s = 0; s < steps; ++s) {
      oracles::BatchStep step;
      step.a = rng.uniform(-5, 5);
      step.z_flow = rng.uniform(-2, 2);
      step.z_learn = rng.uniform(-2, 2);
      history.push_back(step);
      auto [xp, pp] = predict(x, p, step.a, dt, noise);
      auto [xu, pu] = update(xp, pp, ObservationPair{step.z_flow, step.z_learn}, noise);
      x = xu;
      p = pu;
    }
    const Eigen::Vector2d batch =
        oracles::batch_wls_final_state(x0, p0, history, dt, noise);
    const double scale = std::max(1.0, batch.norm());
    CHECK((x.vec() - batch).norm() / scale < 1e-8);
    ++passes;
  }
  CHECK(passes == 50);
}

TEST_CASE("increasing flow noise strictly shrinks the flow column of the gain") {
  NoiseConfig noise;
  noise.sigma_learn_sq = 0.01;
  StateCovariance p;
  p << 0.04, 0.01, 0.01, 0.02;
  double prev_norm = std::numeric_limits<double>::infinity();
  for (double sf = 1e-4; sf < 10.0; sf *= 4.0) {
    NoiseConfig n = noise;
    n.sigma_flow_sq = sf;
    const Mat2 k = gain(p, n);
    const double col_norm = std::hypot(k(0, 0), k(1, 0));
    CHECK(col_norm < prev_norm);
    prev_norm = col_norm;
  }
}

TEST_CASE("backproject_flow") {
  Camera cam;
  cam.focal = 100.0;

  CHECK(backproject_flow(Vec2(0, 0), 2.0, cam).isZero(1e-15));
  CHECK(backproject_flow(Vec2(10, 0), 2.0, cam).isApprox(Vec3(0.2, 0, 0), 1e-12));
  // doubling depth doubles the recovered displacement
  const Vec3 d1 = backproject_flow(Vec2(3, -4), 1.5, cam);
  const Vec3 d2 = backproject_flow(Vec2(3, -4), 3.0, cam);
  CHECK(d2.isApprox(2.0 * d1, 1e-12));
  CHECK_THROWS_AS(backproject_flow(Vec2(1, 1), 0.0, cam), InvalidInputError);

  // a rotated camera maps the displacement back to world axes
  Camera tilted = cam;
  tilted.extrinsic.rotation = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()));
  const Vec3 world = backproject_flow(Vec2(10, 0), 2.0, tilted);
  CHECK(world.isApprox(tilted.extrinsic.rotation.conjugate() * Vec3(0.2, 0, 0), 1e-12));
}

TEST_CASE("fuse_frame is per-axis independent and honors noiseless inputs") {
  NoiseConfig tight;
  tight.sigma_ds_sq = 1e-8;
  tight.sigma_v_sq = 1e-8;
  tight.sigma_flow_sq = 1e-10;
  tight.sigma_learn_sq = 1e-10;

  AxisFilters filters = AxisFilters::with_initial_covariance(1.0, 1.0);
  const Vec3 truth(0.05, -0.02, 0.01);
  const FuseResult fused =
      fuse_frame(filters, truth, truth, Vec3::Zero(), 0.1, tight);
  CHECK(fused.fused_displacement.isApprox(truth, 1e-6));

  // corrupt one axis's flow: that axis follows z_learn, others are untouched
  AxisFilters base = AxisFilters::with_initial_covariance(1.0, 1.0);
  AxisFilters corrupt = AxisFilters::with_initial_covariance(1.0, 1.0);
  NoiseConfig noise;
  noise.sigma_flow_sq = 1e-4;
  noise.sigma_learn_sq = 1e-4;

  const Vec3 z_learn(0.1, 0.2, 0.3);
  const Vec3 z_flow_clean = z_learn;
  Vec3 z_flow_bad = z_learn;
  z_flow_bad.x() = 50.0;

  const FuseResult clean = fuse_frame(base, z_flow_clean, z_learn, Vec3::Zero(), 0.1, noise);

  NoiseConfig distrust_flow = noise;
  distrust_flow.sigma_flow_sq = 1e9;
  const FuseResult guarded =
      fuse_frame(corrupt, z_flow_bad, z_learn, Vec3::Zero(), 0.1, distrust_flow);
  CHECK(guarded.fused_displacement.x() == Approx(z_learn.x()).margin(1e-3));
  CHECK(guarded.fused_displacement.y() == Approx(clean.fused_displacement.y()).margin(1e-3));
  CHECK(guarded.fused_displacement.z() == Approx(clean.fused_displacement.z()).margin(1e-3));
}

TEST_CASE("static object: fused displacement and velocity decay to zero") {
  NoiseConfig noise;
  AxisFilters filters = AxisFilters::with_initial_covariance(0.1, 0.1);
  Vec3 fused = Vec3::Ones();
  for (int frame = 0; frame < 50; ++frame) {
    const FuseResult r =
        fuse_frame(filters, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 0.05, noise);
    fused = r.fused_displacement;
  }
  CHECK(fused.norm() < 1e-6);
  for (int axis = 0; axis < 3; ++axis) {
    CHECK(std::abs(filters.state[axis].velocity) < 1e-4);
  }
}
