#include <catch2/catch.hpp>

#include "test_support.hpp"

#include <cmath>

using namespace cophmm;
using test_support::coeffs_from_matrix;

namespace {

ModelSpec two_state_frank_spec() {
  ModelSpec spec;
  spec.n_states = 2;
  spec.copula_family = CopulaFamily::frank;
  spec.covariates = {{"score_diff", 0.25, 1.5}};
  return spec;
}

ModelParams two_state_frank_params() {
  ModelParams p;
  p.marginals.push_back({CmpParams(0.2, 0.8), CmpParams(0.9, 0.5)});
  p.marginals.push_back({CmpParams(0.4, 1.1), CmpParams(2.2, 0.9)});
  p.thetas = {1.5, -0.7};
  p.delta.resize(2);
  p.delta << 0.8, 0.2;
  p.trans_coeffs.resize(2, 2);
  p.trans_coeffs << -1.2, 0.4,
                    -0.6, -0.3;
  return p;
}

}  // namespace

TEST_CASE("spec validation", "[model]") {
  ModelSpec spec;
  spec.n_states = 0;
  REQUIRE_THROWS_AS(validate_spec(spec), ArgumentError);
  spec.n_states = 2;
  spec.covariates = {{"a", 0.0, 1.0}, {"a", 0.0, 1.0}};
  REQUIRE_THROWS_AS(validate_spec(spec), ArgumentError);
  spec.covariates = {{"a", 0.0, 0.0}};  // sd must be positive
  REQUIRE_THROWS_AS(validate_spec(spec), ArgumentError);
  spec.covariates = {{"a", 0.0, 1.0}, {"b", 2.0, 3.0}};
  REQUIRE_NOTHROW(validate_spec(spec));
}

TEST_CASE("transition pair layout skips the diagonal row-major", "[model]") {
  REQUIRE(pair_index(0, 1, 3) == 0);
  REQUIRE(pair_index(0, 2, 3) == 1);
  REQUIRE(pair_index(1, 0, 3) == 2);
  REQUIRE(pair_index(1, 2, 3) == 3);
  REQUIRE(pair_index(2, 0, 3) == 4);
  REQUIRE(pair_index(2, 1, 3) == 5);
  REQUIRE(pair_index(0, 1, 2) == 0);
  REQUIRE(pair_index(1, 0, 2) == 1);
}

TEST_CASE("parameter count", "[model]") {
  ModelSpec spec;  // N = 1, independence, no covariates
  REQUIRE(num_params(spec) == 4);

  spec.n_states = 3;
  spec.copula_family = CopulaFamily::clayton;
  REQUIRE(num_params(spec) == 23);  // 12 margins + 3 theta + 2 delta + 6 intercepts

  spec.covariates = {{"score_diff", 0.0, 1.0}};
  REQUIRE(num_params(spec) == 29);  // + 6 slopes

  // Homogeneous one-parameter-copula models: N^2 + 5N - 1.
  for (int n : {2, 3, 4, 5}) {
    ModelSpec s;
    s.n_states = n;
    s.copula_family = CopulaFamily::frank;
    REQUIRE(num_params(s) == n * n + 5 * n - 1);
  }
}

TEST_CASE("transition matrix reproduces a fixed target through the link", "[model]") {
  Eigen::MatrixXd gamma(2, 2);
  gamma << 0.9, 0.1,
           0.5, 0.5;
  ModelParams p;
  p.marginals.push_back({CmpParams(0.2, 1.0), CmpParams(1.0, 1.0)});
  p.marginals.push_back({CmpParams(0.2, 1.0), CmpParams(1.0, 1.0)});
  p.delta.resize(2);
  p.delta << 0.5, 0.5;
  p.trans_coeffs = coeffs_from_matrix(gamma, 0);
  const Eigen::MatrixXd got = transition_matrix(p, Eigen::VectorXd(0));
  REQUIRE((got - gamma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("transition matrix rows are distributions", "[model]") {
  const auto params = two_state_frank_params();
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    Eigen::VectorXd cov(1);
    cov << x;
    const Eigen::MatrixXd g = transition_matrix(params, cov);
    for (int i = 0; i < 2; ++i) {
      REQUIRE(g.row(i).sum() == Approx(1.0).margin(1e-12));
      for (int j = 0; j < 2; ++j) REQUIRE(g(i, j) > 0.0);
    }
  }
}

TEST_CASE("zero coefficients give uniform rows", "[model]") {
  ModelParams p = two_state_frank_params();
  p.trans_coeffs.setZero();
  Eigen::VectorXd cov(1);
  cov << 0.7;
  const Eigen::MatrixXd g = transition_matrix(p, cov);
  REQUIRE(g(0, 0) == Approx(0.5).margin(1e-15));
  REQUIRE(g(1, 1) == Approx(0.5).margin(1e-15));
}

TEST_CASE("covariate slopes move probabilities monotonically", "[model]") {
  const auto params = two_state_frank_params();
  // Row 0 slope for the 0->1 pair is +0.4, so gamma_01 rises with x.
  double prev = -1.0;
  for (double x : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
    Eigen::VectorXd cov(1);
    cov << x;
    const double g01 = transition_matrix(params, cov)(0, 1);
    REQUIRE(g01 > prev);
    prev = g01;
  }
}

TEST_CASE("transition link is overflow-safe", "[model]") {
  ModelParams p = two_state_frank_params();
  p.trans_coeffs(0, 0) = 800.0;  // exp(800) would overflow without shifting
  Eigen::VectorXd cov(1);
  cov << 0.0;
  const Eigen::MatrixXd g = transition_matrix(p, cov);
  REQUIRE(std::isfinite(g(0, 0)));
  REQUIRE(g.row(0).sum() == Approx(1.0).margin(1e-12));
  REQUIRE(g(0, 1) == Approx(1.0).margin(1e-12));
}

TEST_CASE("covariate dimension mismatches are rejected", "[model]") {
  const auto params = two_state_frank_params();
  REQUIRE_THROWS_AS(transition_matrix(params, Eigen::VectorXd(0)), ArgumentError);
  Eigen::VectorXd two(2);
  two << 0.0, 1.0;
  REQUIRE_THROWS_AS(transition_matrix(params, two), ArgumentError);
}

TEST_CASE("parameter validation catches structural mismatches", "[model]") {
  const auto spec = two_state_frank_spec();
  auto params = two_state_frank_params();
  REQUIRE_NOTHROW(validate_params(spec, params));

  auto bad = params;
  bad.thetas = {1.5};
  REQUIRE_THROWS_AS(validate_params(spec, bad), ArgumentError);

  bad = params;
  bad.thetas = {1.5, std::numeric_limits<double>::infinity()};
  REQUIRE_THROWS_AS(validate_params(spec, bad), DomainError);

  bad = params;
  bad.delta.resize(3);
  bad.delta << 0.5, 0.3, 0.2;
  REQUIRE_THROWS_AS(validate_params(spec, bad), ArgumentError);

  bad = params;
  bad.delta << 0.9, 0.2;  // does not sum to one
  REQUIRE_THROWS_AS(validate_params(spec, bad), ArgumentError);

  bad = params;
  bad.delta << -0.1, 1.1;  // negative entry
  REQUIRE_THROWS_AS(validate_params(spec, bad), ArgumentError);

  // A boundary-zero delta is a valid distribution but has no logit image.
  bad = params;
  bad.delta << 1.0, 0.0;
  REQUIRE_NOTHROW(validate_params(spec, bad));
  REQUIRE_THROWS_AS(pack(spec, bad), DomainError);

  bad = params;
  bad.trans_coeffs.resize(2, 1);  // missing the slope column
  bad.trans_coeffs << -1.2, -0.6;
  REQUIRE_THROWS_AS(validate_params(spec, bad), ArgumentError);

  auto indep_spec = spec;
  indep_spec.copula_family = CopulaFamily::independence;
  REQUIRE_THROWS_AS(validate_params(indep_spec, params), ArgumentError);
}

TEST_CASE("state joint pmf matches the copula construction", "[model]") {
  const auto spec = two_state_frank_spec();
  const auto params = two_state_frank_params();
  for (int s = 0; s < 2; ++s) {
    const CopulaSpec c(CopulaFamily::frank, params.thetas[s]);
    for (int a = 0; a <= 5; ++a)
      for (int b = 0; b <= 5; ++b)
        REQUIRE(state_joint_pmf(spec, params, s, a, b) ==
                Approx(bivariate_pmf(c, params.marginals[s][0],
                                     params.marginals[s][1], a, b))
                    .margin(1e-15));
  }

  ModelSpec indep;
  indep.n_states = 1;
  ModelParams q;
  q.marginals.push_back({CmpParams(0.3, 1.0), CmpParams(1.4, 0.7)});
  q.delta.resize(1);
  q.delta << 1.0;
  q.trans_coeffs.resize(0, 1);
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; b <= 5; ++b)
      REQUIRE(state_joint_pmf(indep, q, 0, a, b) ==
              Approx(pmf(q.marginals[0][0], a) * pmf(q.marginals[0][1], b))
                  .epsilon(1e-12));
}

TEST_CASE("theta working transforms", "[model]") {
  // Frank: identity.
  REQUIRE(theta_to_working(CopulaFamily::frank, -2.5) == -2.5);
  REQUIRE(working_to_theta(CopulaFamily::frank, 3.25) == 3.25);
  // Clayton: log1p, inverse never drops below the closed boundary at -1
  // (expm1(-40) rounds to exactly -1, which is still in the domain).
  for (double theta : {-0.9, -0.5, 0.1, 5.0})
    REQUIRE(working_to_theta(CopulaFamily::clayton,
                             theta_to_working(CopulaFamily::clayton, theta)) ==
            Approx(theta).epsilon(1e-14));
  REQUIRE(working_to_theta(CopulaFamily::clayton, -40.0) >= -1.0);
  // AMH: atanh, inverse stays inside (-1, 1).
  for (double theta : {-0.9, -0.2, 0.2, 0.9})
    REQUIRE(working_to_theta(CopulaFamily::amh,
                             theta_to_working(CopulaFamily::amh, theta)) ==
            Approx(theta).epsilon(1e-14));
  REQUIRE(std::abs(working_to_theta(CopulaFamily::amh, 30.0)) < 1.0);
}

TEST_CASE("pack and unpack round-trip", "[model]") {
  const auto spec = two_state_frank_spec();
  const auto params = two_state_frank_params();
  const Eigen::VectorXd w = pack(spec, params);
  REQUIRE(w.size() == num_params(spec));

  const ModelParams back = unpack(spec, w);
  for (int s = 0; s < 2; ++s) {
    REQUIRE(back.marginals[s][0].lambda ==
            Approx(params.marginals[s][0].lambda).epsilon(1e-12));
    REQUIRE(back.marginals[s][0].nu == Approx(params.marginals[s][0].nu).epsilon(1e-12));
    REQUIRE(back.marginals[s][1].lambda ==
            Approx(params.marginals[s][1].lambda).epsilon(1e-12));
    REQUIRE(back.marginals[s][1].nu == Approx(params.marginals[s][1].nu).epsilon(1e-12));
    REQUIRE(back.thetas[s] == Approx(params.thetas[s]).epsilon(1e-12));
  }
  REQUIRE((back.delta - params.delta).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((back.trans_coeffs - params.trans_coeffs).cwiseAbs().maxCoeff() < 1e-14);

  // Working -> natural -> working is bitwise stable.
  const Eigen::VectorXd w2 = pack(spec, unpack(spec, w));
  REQUIRE((w2 - w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unpack floors nu at the working-scale minimum", "[model]") {
  ModelSpec spec;
  spec.n_states = 1;
  ModelParams p;
  p.marginals.push_back({CmpParams(0.3, 0.0), CmpParams(0.67, 0.0)});
  p.delta.resize(1);
  p.delta << 1.0;
  p.trans_coeffs.resize(0, 1);
  const Eigen::VectorXd w = pack(spec, p);
  const ModelParams back = unpack(spec, w);
  REQUIRE(back.marginals[0][0].nu == Approx(kNuFloor).epsilon(1e-12));
  REQUIRE(back.marginals[0][1].nu == Approx(kNuFloor).epsilon(1e-12));
  // The floored margin is numerically the same distribution.
  REQUIRE(pmf(back.marginals[0][1], 3) == Approx(pmf(p.marginals[0][1], 3)).epsilon(1e-6));
}

TEST_CASE("unpack rejects out-of-range working vectors", "[model]") {
  const auto spec = two_state_frank_spec();
  Eigen::VectorXd w = pack(spec, two_state_frank_params());
  w(0) = 900.0;  // lambda = e^900 overflows to infinity
  REQUIRE_THROWS_AS(unpack(spec, w), DomainError);
  Eigen::VectorXd short_w(3);
  short_w.setZero();
  REQUIRE_THROWS_AS(unpack(spec, short_w), ArgumentError);
}
