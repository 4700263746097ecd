#include <doctest.h>

#include <cmath>

#include "recap/design.hpp"
#include "recap/simulate.hpp"
#include "test_util.hpp"

using namespace recap;

TEST_CASE("build_design for the heterogeneity-behavior family") {
  const ModelSpec model = testutil::model_of(ModelFamily::Mhb, 1);
  Eigen::VectorXd x(1);
  x << 0.7;
  Eigen::VectorXi d(3);
  d << 1, 0, 1;
  const DesignVectors dv = build_design(model, x, d, 3);
  // occasion 1: no prior capture; occasions 2, 3: the behavioral indicator is
  // on even though occasion 2 itself was a miss (enduring memory)
  CHECK(dv.z[0] == Eigen::Vector3d(1, 0.7, 0));
  CHECK(dv.z[1] == Eigen::Vector3d(1, 0.7, 1));
  CHECK(dv.z[2] == Eigen::Vector3d(1, 0.7, 1));
  for (int k = 0; k < 3; ++k) CHECK(dv.z0[(size_t)k] == Eigen::Vector3d(1, 0.7, 0));
}

TEST_CASE("build_design for pure heterogeneity ignores the history") {
  const ModelSpec model = testutil::model_of(ModelFamily::Mh, 1);
  Eigen::VectorXd x(1);
  x << -0.3;
  Eigen::VectorXi d(4);
  d << 0, 1, 1, 0;
  const DesignVectors dv = build_design(model, x, d, 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(dv.z[(size_t)k] == Eigen::Vector2d(1, -0.3));
    CHECK(dv.z0[(size_t)k] == dv.z[(size_t)k]);
  }
}

TEST_CASE("build_design for heterogeneity-time uses occasion indicators") {
  const ModelSpec model = testutil::model_of(ModelFamily::Mht, 1);
  Eigen::VectorXd x(1);
  x << 0.5;
  Eigen::VectorXi d(2);
  d << 0, 1;
  const DesignVectors dv = build_design(model, x, d, 2);
  CHECK(dv.z[0] == Eigen::Vector3d(0.5, 1, 0));
  CHECK(dv.z[1] == Eigen::Vector3d(0.5, 0, 1));
}

TEST_CASE("never-captured designs do not depend on the history") {
  Rng rng(7);
  for (const auto family : {ModelFamily::M0, ModelFamily::Mb, ModelFamily::Mtb,
                            ModelFamily::Mh, ModelFamily::Mht, ModelFamily::Mhb,
                            ModelFamily::Mhtb}) {
    ModelSpec model = testutil::model_of(family, 0);
    if (model.has_heterogeneity()) model.covariate_columns = {0};
    const int K = 4;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(model.covariate_dim(), rng.normal());
    Eigen::VectorXi d1(K), d2(K);
    for (int k = 0; k < K; ++k) {
      d1[k] = rng.bernoulli(0.5);
      d2[k] = rng.bernoulli(0.5);
    }
    if (d1.sum() == 0) d1[0] = 1;
    if (d2.sum() == 0) d2[K - 1] = 1;
    const DesignVectors a = build_design(model, x, d1, K);
    const DesignVectors b = build_design(model, x, d2, K);
    for (int k = 0; k < K; ++k) CHECK(a.z0[(size_t)k] == b.z0[(size_t)k]);
  }
}

TEST_CASE("parameter dimension per family") {
  const int K = 5, q = 2;
  CHECK(testutil::model_of(ModelFamily::M0).param_dim(K) == 1);
  CHECK(testutil::model_of(ModelFamily::Mt).param_dim(K) == K);
  CHECK(testutil::model_of(ModelFamily::Mb).param_dim(K) == 2);
  CHECK(testutil::model_of(ModelFamily::Mtb).param_dim(K) == K + 1);
  CHECK(testutil::model_of(ModelFamily::Mh, q).param_dim(K) == 1 + q);
  CHECK(testutil::model_of(ModelFamily::Mht, q).param_dim(K) == q + K);
  CHECK(testutil::model_of(ModelFamily::Mhb, q).param_dim(K) == 2 + q);
  CHECK(testutil::model_of(ModelFamily::Mhtb, q).param_dim(K) == q + K + 1);
}

TEST_CASE("capture_prob") {
  Eigen::VectorXd z(2), beta(2);
  z << 1, 0.5;
  beta << 0, 0;
  CHECK(capture_prob(z, beta) == 0.5);
  beta << 0.1, -2.5;  // linear predictor -1.15
  CHECK(capture_prob(z, beta) == doctest::Approx(0.24048908305088898).epsilon(1e-12));
  beta << 40, 0;
  CHECK(capture_prob(z, beta) == doctest::Approx(1.0));
  CHECK(std::isfinite(capture_prob(z, beta)));
  beta << -800, 0;  // far beyond exp underflow
  CHECK(capture_prob(z, beta) >= 0.0);
  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(capture_prob(z, bad), DataError);
}

TEST_CASE("never_capture_prob") {
  const ModelSpec mh = testutil::model_of(ModelFamily::Mh, 1);
  Eigen::VectorXd x(1);
  x << 0.0;
  CHECK(never_capture_prob(mh, x, Eigen::Vector2d(0, 0), 2) == doctest::Approx(0.25).epsilon(1e-14));

  // behavioral coefficient cannot matter
  const ModelSpec mhb = testutil::model_of(ModelFamily::Mhb, 1);
  const double p1 = never_capture_prob(mhb, x, Eigen::Vector3d(0.3, -0.2, 0.0), 3);
  const double p2 = never_capture_prob(mhb, x, Eigen::Vector3d(0.3, -0.2, 5.0), 3);
  CHECK(p1 == p2);

  const ModelSpec mht = testutil::model_of(ModelFamily::Mht, 1);
  CHECK(never_capture_prob(mht, x, Eigen::Vector3d(0, 1, -1), 2) ==
        doctest::Approx(0.19661193324148185).epsilon(1e-12));
}

TEST_CASE("never_capture_prob at zero parameters is 2^-K for intercept families") {
  Eigen::VectorXd x(1);
  x << 1.7;
  for (const auto family : {ModelFamily::M0, ModelFamily::Mb, ModelFamily::Mh, ModelFamily::Mhb}) {
    ModelSpec model = testutil::model_of(family, 0);
    if (model.has_heterogeneity()) model.covariate_columns = {0};
    const int K = 5;
    const Eigen::VectorXd beta = Eigen::VectorXd::Zero(model.param_dim(K));
    const Eigen::VectorXd xv = model.has_heterogeneity() ? x : Eigen::VectorXd(0);
    CHECK(never_capture_prob(model, xv, beta, K) ==
          doctest::Approx(std::pow(2.0, -K)).epsilon(1e-14));
  }
}

TEST_CASE("capture_prob strictly inside (0,1) and monotone") {
  Eigen::VectorXd z(2);
  z << 1, 2.0;
  Eigen::VectorXd beta(2);
  beta << 0.3, -0.4;
  double prev = 0.0;
  for (double b1 = -3; b1 <= 3; b1 += 0.5) {
    beta[1] = b1;
    const double p = capture_prob(z, beta);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p > prev);  // z[1] > 0 so increasing in beta[1]
    prev = p;
  }
}

TEST_CASE("model validation ties heterogeneity to covariates") {
  ModelSpec mh = testutil::model_of(ModelFamily::Mh, 0);
  CHECK_THROWS_AS(mh.validate(), DataError);
  ModelSpec m0 = testutil::model_of(ModelFamily::M0, 1);
  CHECK_THROWS_AS(m0.validate(), DataError);
  Eigen::VectorXd x(2);
  x << 1, 2;
  Eigen::VectorXi d(2);
  d << 1, 0;
  CHECK_THROWS_AS(build_design(testutil::model_of(ModelFamily::Mh, 1), x, d, 2), DataError);
}

TEST_CASE("family tokens round-trip") {
  for (const auto family : {ModelFamily::M0, ModelFamily::Mt, ModelFamily::Mb, ModelFamily::Mtb,
                            ModelFamily::Mh, ModelFamily::Mht, ModelFamily::Mhb, ModelFamily::Mhtb}) {
    const auto parsed = parse_family(family_token(family));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == family);
  }
  CHECK(!parse_family("mx").has_value());
}
