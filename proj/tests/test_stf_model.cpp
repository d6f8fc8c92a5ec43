// Copyright 2026 The DSPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dspc/stf_model.hpp"

#include <cmath>
#include <cstdio>

#include <doctest.h>

#include "support.hpp"

using namespace dspc;

namespace {

Vec vec1(double a) { return Vec::Constant(1, a); }

CompositeStfModel two_cluster_model_at(double dist0, double dist1) {
  // Generic 1-d input model with unit covariances; prediction-time
  // dissimilarities are 0.5 * distance^2 to each centroid's input slot.
  CompositeStfModel m = CompositeStfModel::create_generic(1, 1, 2, 1e9);
  for (double d : {dist0, dist1}) {
    Cluster c;
    c.centroid = (Vec(2) << d, 0.0).finished();
    c.xi = Mat::Identity(2, 2);
    c.lambda = Mat::Identity(1, 1);
    m.clusters.push_back(c);
    m.locals.push_back(LocalLinearModel{Mat::Zero(1, 1), Vec::Zero(1)});
  }
  return m;
}

}  // namespace

TEST_CASE("build_regressor stacks inputs then outputs") {
  StfHyperParams hyper;
  hyper.d_u = 2;
  hyper.d_y = 1;
  hyper.n_u = 1;
  hyper.n_y = 1;
  const Vec r = build_regressor({vec1(1), vec1(2)}, {vec1(3)}, hyper);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2.0);
  CHECK(r[2] == 3.0);

  StfHyperParams zero;
  const Vec z = build_regressor({vec1(0)}, {vec1(0)}, zero);
  CHECK(z.isZero(0.0));

  StfHyperParams h4;
  h4.d_u = 2;
  h4.d_y = 2;
  const Vec four =
      build_regressor({vec1(1), vec1(2)}, {vec1(3), vec1(4)}, h4);
  CHECK(four.size() == h4.regressor_dim());
  CHECK(four.size() == 4);
}

TEST_CASE("build_regressor names the offending slot") {
  StfHyperParams hyper;
  hyper.d_u = 2;
  hyper.d_y = 1;
  CHECK_THROWS_WITH_AS(
      build_regressor({vec1(1), Vec::Zero(2)}, {vec1(3)}, hyper),
      doctest::Contains("u_hist[1]"), DimensionError);
  CHECK_THROWS_AS(build_regressor({vec1(1)}, {vec1(3)}, hyper),
                  DimensionError);
}

TEST_CASE("dissimilarity hand values") {
  Cluster c;
  c.centroid = Vec::Zero(2);
  c.xi = Mat::Identity(2, 2);
  c.lambda = Mat::Identity(1, 1);
  LocalLinearModel local{Mat::Zero(1, 1), Vec::Zero(1)};

  // Point at centroid with exact local prediction.
  CHECK(dissimilarity(vec1(0), vec1(0), c, local) == doctest::Approx(0.0));

  // ||x_a - nu||^2 = 2 and ||e||^2 = 2 with unit covariances -> D = 2.
  local.b = vec1(-std::sqrt(2.0) + 1.0);  // e = 1 - b - 0 ... set below
  LocalLinearModel l2{Mat::Zero(1, 1), Vec::Zero(1)};
  const Vec u = vec1(1.0);
  const Vec y = vec1(1.0);       // x_a = [1,1], ||x_a||^2 = 2
  l2.b = vec1(1.0 - std::sqrt(2.0));  // e = y - b = sqrt(2), e^2 = 2
  CHECK(dissimilarity(u, y, c, l2) == doctest::Approx(2.0).epsilon(1e-9));

  // Scaling Xi by 4 quarters the Mahalanobis term; with e = 0 D halves...
  Cluster c4 = c;
  c4.xi = 4.0 * Mat::Identity(2, 2);
  LocalLinearModel exact{Mat::Zero(1, 1), vec1(1.0)};  // predicts y = 1
  const double d1 = dissimilarity(u, y, c, exact);
  const double d4 = dissimilarity(u, y, c4, exact);
  CHECK(d4 == doctest::Approx(d1 / 4.0).epsilon(1e-6));
  CHECK(d1 >= 0.0);
}

TEST_CASE("interpolation weights: single cluster and symmetry") {
  CompositeStfModel one = two_cluster_model_at(0.0, 0.0);
  one.clusters.pop_back();
  one.locals.pop_back();
  const Vec w1 = interpolation_weights(one, vec1(0.7));
  REQUIRE(w1.size() == 1);
  CHECK(w1[0] == doctest::Approx(1.0));

  // Equal distances -> equal weights.
  CompositeStfModel sym = two_cluster_model_at(-1.0, 1.0);
  const Vec w = interpolation_weights(sym, vec1(0.0));
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("interpolation weights: softmax arithmetic D = (0, ln 3)") {
  // D_i = 0.5 d_i^2: put cluster 1 at the query and cluster 2 at
  // sqrt(2 ln 3) so D_2 = ln 3; softmax gives (0.75, 0.25).
  CompositeStfModel m = two_cluster_model_at(0.0, std::sqrt(2.0 * std::log(3.0)));
  const Vec w = interpolation_weights(m, vec1(0.0));
  CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-8));
  CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("softmax shift invariance") {
  // Centroid pairs at radii (r1, r2) and (sqrt(r1^2+2c), sqrt(r2^2+2c))
  // produce D vectors differing by the constant c; weights must match.
  const double r1 = 0.4, r2 = 1.3, c = 7.0;
  CompositeStfModel a = two_cluster_model_at(r1, r2);
  CompositeStfModel b = two_cluster_model_at(std::sqrt(r1 * r1 + 2.0 * c),
                                             std::sqrt(r2 * r2 + 2.0 * c));
  const Vec wa = interpolation_weights(a, vec1(0.0));
  const Vec wb = interpolation_weights(b, vec1(0.0));
  CHECK((wa - wb).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("weights stay on the simplex even for huge dissimilarities") {
  CompositeStfModel m = two_cluster_model_at(0.0, 2.0e4);
  const Vec w = interpolation_weights(m, vec1(0.0));
  CHECK(w.allFinite());
  CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
  for (Eigen::Index i = 0; i < w.size(); ++i) CHECK(w[i] > 0.0);
}

TEST_CASE("predict: single local model") {
  CompositeStfModel m = CompositeStfModel::create_generic(2, 1, 1, 1e9);
  Cluster c;
  c.centroid = Vec::Zero(3);
  c.xi = Mat::Identity(3, 3);
  c.lambda = Mat::Identity(1, 1);
  m.clusters.push_back(c);
  m.locals.push_back(
      LocalLinearModel{(Mat(1, 2) << 1.0, 0.0).finished(), vec1(0.5)});
  const Vec y = predict(m, (Vec(2) << 2.0, 3.0).finished());
  CHECK(y[0] == doctest::Approx(2.5));
}

TEST_CASE("predict: identical locals are weight independent") {
  CompositeStfModel m = two_cluster_model_at(-2.0, 5.0);
  const Mat a = (Mat(1, 1) << 1.7).finished();
  m.locals[0] = LocalLinearModel{a, vec1(-0.3)};
  m.locals[1] = LocalLinearModel{a, vec1(-0.3)};
  for (double u : {-3.0, 0.0, 1.0, 4.0}) {
    CHECK(predict(m, vec1(u))[0] ==
          doctest::Approx(1.7 * u - 0.3).epsilon(1e-12));
  }
}

TEST_CASE("packing equivalence: predict == Phi * zeta on random models") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    CompositeStfModel m = test::random_model(rng, 1, 1, 2, 1, 3);
    const Mat phi = pack_parameters(m);
    for (int i = 0; i < 5; ++i) {
      const Vec u = rng.normal_vec(m.input_dim);
      const Vec alpha = interpolation_weights(m, u);
      const Vec zeta = pack_regressor(u, alpha);
      const Vec direct = predict(m, u);
      const Vec packed = phi * zeta;
      CHECK((direct - packed).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("pack_regressor layout") {
  const Vec u = (Vec(2) << 2.0, 5.0).finished();
  const Vec alpha = (Vec(2) << 0.3, 0.7).finished();
  const Vec zeta = pack_regressor(u, alpha);
  REQUIRE(zeta.size() == 6);
  CHECK(zeta[0] == doctest::Approx(0.6));
  CHECK(zeta[1] == doctest::Approx(1.5));
  CHECK(zeta[2] == doctest::Approx(0.3));
  CHECK(zeta[3] == doctest::Approx(1.4));
  CHECK(zeta[4] == doctest::Approx(3.5));
  CHECK(zeta[5] == doctest::Approx(0.7));
  // Weight slots sum to one.
  CHECK(zeta[2] + zeta[5] == doctest::Approx(1.0));

  const Vec single = pack_regressor(u, Vec::Ones(1));
  CHECK(single[0] == 2.0);
  CHECK(single[1] == 5.0);
  CHECK(single[2] == 1.0);
}

TEST_CASE("pack_parameters layout and round trip") {
  CompositeStfModel m = CompositeStfModel::create_generic(1, 1, 1, 1e9);
  Cluster c;
  c.centroid = Vec::Zero(2);
  c.xi = Mat::Identity(2, 2);
  c.lambda = Mat::Identity(1, 1);
  m.clusters.push_back(c);
  m.locals.push_back(LocalLinearModel{(Mat(1, 1) << 2.0).finished(), vec1(3.0)});
  const Mat phi = pack_parameters(m);
  REQUIRE(phi.rows() == 1);
  REQUIRE(phi.cols() == 2);
  CHECK(phi(0, 0) == 2.0);
  CHECK(phi(0, 1) == 3.0);

  Rng rng(7);
  CompositeStfModel r = test::random_model(rng, 2, 2, 2, 2, 3);
  const Mat packed = pack_parameters(r);
  CHECK(packed.cols() == r.cluster_count() * (r.input_dim + 1));
  CompositeStfModel copy = r;
  for (auto& lm : copy.locals) {
    lm.a.setZero();
    lm.b.setZero();
  }
  unpack_parameters(packed, copy);
  for (int i = 0; i < r.cluster_count(); ++i) {
    CHECK(copy.locals[i].a == r.locals[i].a);
    CHECK(copy.locals[i].b == r.locals[i].b);
  }
}

TEST_CASE("evolve: first point initializes, duplicates match, cap respected") {
  CompositeStfModel m = CompositeStfModel::create_generic(1, 1, 2, 2.0);

  const Vec u0 = vec1(0.1), y0 = vec1(0.2);
  const EvolveOutcome first = evolve(m, u0, y0);
  CHECK(first.kind == EvolveOutcome::kCreated);
  REQUIRE(m.cluster_count() == 1);
  CHECK(m.clusters[0].centroid[0] == doctest::Approx(0.1));
  CHECK(m.clusters[0].centroid[1] == doctest::Approx(0.2));

  // Same point again: zero dissimilarity, matched, count unchanged.
  const EvolveOutcome again = evolve(m, u0, y0);
  CHECK(again.kind == EvolveOutcome::kMatched);
  CHECK(again.cluster_index == 0);
  CHECK(m.cluster_count() == 1);

  // Far point spawns the second cluster and copies the nearest local.
  m.locals[0].a(0, 0) = 1.25;
  const EvolveOutcome spawned = evolve(m, vec1(50.0), vec1(-3.0));
  CHECK(spawned.kind == EvolveOutcome::kCreated);
  REQUIRE(m.cluster_count() == 2);
  CHECK(m.locals[1].a(0, 0) == 1.25);

  // At the cap, a far point is matched to the nearest cluster instead.
  const EvolveOutcome capped = evolve(m, vec1(500.0), vec1(9.0));
  CHECK(capped.kind == EvolveOutcome::kMatched);
  CHECK(capped.cluster_index == 1);
  CHECK(m.cluster_count() == 2);
}

TEST_CASE("cluster count is monotone and bounded over random streams") {
  CompositeStfModel m = CompositeStfModel::create_generic(1, 1, 4, 1.0);
  Rng rng(3);
  int last = 0;
  for (int k = 0; k < 300; ++k) {
    evolve(m, vec1(3.0 * rng.normal()), vec1(rng.normal()));
    CHECK(m.cluster_count() >= last);
    CHECK(m.cluster_count() <= 4);
    last = m.cluster_count();
  }
  CHECK(last >= 2);
}

TEST_CASE("model serialization round trip") {
  Rng rng(11);
  CompositeStfModel m = test::random_model(rng, 2, 2, 2, 2, 3);
  m.norm_in.mean.setConstant(0.25);
  m.norm_in.scale.setConstant(1.5);
  const std::string text = model_to_json(m);
  const CompositeStfModel back = model_from_json(text);
  REQUIRE(back.cluster_count() == m.cluster_count());
  for (int i = 0; i < 10; ++i) {
    const Vec u = rng.normal_vec(m.input_dim);
    CHECK((predict_raw(m, u) - predict_raw(back, u)).norm() <= 1e-14);
  }
  CHECK(back.hyper.l_max == m.hyper.l_max);
  CHECK(back.evolve_cfg.rho == m.evolve_cfg.rho);
}

TEST_CASE("raw locals fold the normalizers exactly") {
  Rng rng(19);
  CompositeStfModel m = test::random_model(rng, 1, 1, 2, 1, 2);
  m.norm_in.mean = rng.normal_vec(m.input_dim);
  m.norm_in.scale = (Vec(m.input_dim) << 0.5, 2.0, 1.5).finished();
  m.norm_out.mean = rng.normal_vec(1);
  m.norm_out.scale = vec1(3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec u_raw = rng.normal_vec(m.input_dim);
    const Vec alpha = interpolation_weights_raw(m, u_raw);
    Vec blended = Vec::Zero(1);
    for (int i = 0; i < m.cluster_count(); ++i) {
      const LocalLinearModel raw = m.raw_local(i);
      blended += alpha[i] * (raw.a * u_raw + raw.b);
    }
    CHECK((blended - predict_raw(m, u_raw)).norm() <= 1e-12);
  }
}
