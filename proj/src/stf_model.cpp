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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace dspc {

namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  const auto rows = j.size();
  if (rows == 0) return Mat(0, 0);
  const auto cols = j.at(0).size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw ConfigError("ragged matrix in model file");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

// Squared Mahalanobis distance with jittered SPD solve.
double mahalanobis_sq(const Vec& d, const Mat& cov, const char* what) {
  const Mat sol = solve_spd(cov, d, what);
  return d.dot(sol.col(0));
}

// Dissimilarities for all clusters; y == nullptr means prediction time:
// residual 0 and Mahalanobis over the regressor marginal.
Vec all_dissimilarities(const CompositeStfModel& model, const Vec& u_stf,
                        const Vec* y) {
  const int l = model.cluster_count();
  Vec d(l);
  if (y != nullptr) {
    for (int i = 0; i < l; ++i) {
      d[i] = dissimilarity(u_stf, *y, model.clusters[i], model.locals[i]);
    }
  } else {
    const int nu = model.input_dim;
    for (int i = 0; i < l; ++i) {
      const Cluster& c = model.clusters[i];
      const Vec diff = u_stf - c.centroid.head(nu);
      d[i] = 0.5 * mahalanobis_sq(diff, c.xi.topLeftCorner(nu, nu),
                                  "cluster covariance (regressor block)");
    }
  }
  return d;
}

Vec softmax_of_negated(const Vec& d) {
  // Shifting by the minimum keeps exponents in range; capping the shifted
  // value keeps every weight strictly positive.
  const double dmin = d.minCoeff();
  Vec w(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    w[i] = std::exp(-std::min(d[i] - dmin, 700.0));
  }
  return w / w.sum();
}

}  // namespace

void StfHyperParams::validate() const {
  if (d_u < 1) throw ArgumentError("StfHyperParams.d_u must be >= 1");
  if (d_y < 1) throw ArgumentError("StfHyperParams.d_y must be >= 1");
  if (l_max < 1) throw ArgumentError("StfHyperParams.l_max must be >= 1");
  if (!(create_threshold > 0.0)) {
    throw ArgumentError("StfHyperParams.create_threshold must be > 0");
  }
  if (n_u < 1 || n_y < 1) {
    throw ArgumentError("StfHyperParams.n_u and n_y must be >= 1");
  }
}

ChannelNormalizer ChannelNormalizer::identity(int n) {
  ChannelNormalizer z;
  z.mean = Vec::Zero(n);
  z.scale = Vec::Ones(n);
  return z;
}

Vec ChannelNormalizer::apply(const Vec& raw) const {
  require_dim(raw, mean.size(), "ChannelNormalizer input");
  return (raw - mean).cwiseQuotient(scale);
}

Vec ChannelNormalizer::invert(const Vec& normalized) const {
  require_dim(normalized, mean.size(), "ChannelNormalizer input");
  return normalized.cwiseProduct(scale) + mean;
}

CompositeStfModel CompositeStfModel::create(const StfHyperParams& hyper,
                                            const EvolveConfig& cfg) {
  hyper.validate();
  CompositeStfModel m;
  m.hyper = hyper;
  m.evolve_cfg = cfg;
  m.input_dim = hyper.regressor_dim();
  m.norm_in = ChannelNormalizer::identity(m.input_dim);
  m.norm_out = ChannelNormalizer::identity(hyper.n_y);
  return m;
}

CompositeStfModel CompositeStfModel::create_generic(int input_dim,
                                                    int output_dim, int l_max,
                                                    double create_threshold,
                                                    const EvolveConfig& cfg) {
  StfHyperParams h;
  h.d_u = 1;
  h.d_y = 1;
  h.n_u = input_dim;
  h.n_y = output_dim;
  h.l_max = l_max;
  h.create_threshold = create_threshold;
  CompositeStfModel m = create(h, cfg);
  m.input_dim = input_dim;  // regressor_dim would add the d_y output slots
  m.norm_in = ChannelNormalizer::identity(input_dim);
  return m;
}

LocalLinearModel CompositeStfModel::raw_local(int i) const {
  // y_raw = mu_y + Sy^-1 (A Su (u_raw - mu_u) + b), Su = diag(1/scale_in).
  const LocalLinearModel& m = locals.at(i);
  const Vec inv_in = norm_in.scale.cwiseInverse();
  LocalLinearModel out;
  out.a = norm_out.scale.asDiagonal() * m.a * inv_in.asDiagonal();
  out.b = norm_out.mean +
          norm_out.scale.cwiseProduct(m.b - m.a * (norm_in.mean.cwiseQuotient(
                                                norm_in.scale)));
  return out;
}

Vec build_regressor(const std::vector<Vec>& u_hist,
                    const std::vector<Vec>& y_hist,
                    const StfHyperParams& hyper) {
  hyper.validate();
  if (static_cast<int>(u_hist.size()) != hyper.d_u) {
    throw DimensionError("build_regressor: u_hist needs " +
                         std::to_string(hyper.d_u) + " entries, got " +
                         std::to_string(u_hist.size()));
  }
  if (static_cast<int>(y_hist.size()) != hyper.d_y) {
    throw DimensionError("build_regressor: y_hist needs " +
                         std::to_string(hyper.d_y) + " entries, got " +
                         std::to_string(y_hist.size()));
  }
  Vec u_stf(hyper.regressor_dim());
  Eigen::Index at = 0;
  for (int i = 0; i < hyper.d_u; ++i) {
    if (u_hist[i].size() != hyper.n_u) {
      throw DimensionError("build_regressor: u_hist[" + std::to_string(i) +
                           "] has dimension " + std::to_string(u_hist[i].size()) +
                           ", expected " + std::to_string(hyper.n_u));
    }
    u_stf.segment(at, hyper.n_u) = u_hist[i];
    at += hyper.n_u;
  }
  for (int i = 0; i < hyper.d_y; ++i) {
    if (y_hist[i].size() != hyper.n_y) {
      throw DimensionError("build_regressor: y_hist[" + std::to_string(i) +
                           "] has dimension " + std::to_string(y_hist[i].size()) +
                           ", expected " + std::to_string(hyper.n_y));
    }
    u_stf.segment(at, hyper.n_y) = y_hist[i];
    at += hyper.n_y;
  }
  return u_stf;
}

double dissimilarity(const Vec& u_stf, const Vec& y, const Cluster& cluster,
                     const LocalLinearModel& local) {
  Vec xa(u_stf.size() + y.size());
  xa << u_stf, y;
  require_dim(xa, cluster.centroid.size(), "dissimilarity joint point");
  const double m2 =
      mahalanobis_sq(xa - cluster.centroid, cluster.xi, "cluster covariance");
  const Vec e = y - (local.a * u_stf + local.b);
  const double r2 = mahalanobis_sq(e, cluster.lambda, "residual covariance");
  return 0.5 * (m2 + r2);
}

Vec interpolation_weights(const CompositeStfModel& model, const Vec& u_stf,
                          const Vec* y_for_residual) {
  if (model.cluster_count() < 1) {
    throw ArgumentError("interpolation_weights: model has no clusters");
  }
  require_dim(u_stf, model.input_dim, "interpolation_weights input");
  return softmax_of_negated(all_dissimilarities(model, u_stf, y_for_residual));
}

Vec predict(const CompositeStfModel& model, const Vec& u_stf) {
  const Vec alpha = interpolation_weights(model, u_stf);
  Vec y = Vec::Zero(model.output_dim());
  for (int i = 0; i < model.cluster_count(); ++i) {
    y += alpha[i] * (model.locals[i].a * u_stf + model.locals[i].b);
  }
  return y;
}

Vec predict_raw(const CompositeStfModel& model, const Vec& u_raw) {
  return model.norm_out.invert(predict(model, model.norm_in.apply(u_raw)));
}

Vec interpolation_weights_raw(const CompositeStfModel& model,
                              const Vec& u_raw) {
  return interpolation_weights(model, model.norm_in.apply(u_raw));
}

Vec pack_regressor(const Vec& u_stf, const Vec& alpha) {
  const Eigen::Index nu = u_stf.size();
  const Eigen::Index l = alpha.size();
  Vec zeta(l * (nu + 1));
  for (Eigen::Index i = 0; i < l; ++i) {
    zeta.segment(i * (nu + 1), nu) = alpha[i] * u_stf;
    zeta[i * (nu + 1) + nu] = alpha[i];
  }
  return zeta;
}

Mat pack_parameters(const CompositeStfModel& model) {
  const int nu = model.input_dim;
  Mat phi(model.output_dim(), model.packed_dim());
  for (int i = 0; i < model.cluster_count(); ++i) {
    phi.middleCols(i * (nu + 1), nu) = model.locals[i].a;
    phi.col(i * (nu + 1) + nu) = model.locals[i].b;
  }
  return phi;
}

void unpack_parameters(const Mat& phi, CompositeStfModel& model) {
  const int nu = model.input_dim;
  if (phi.rows() != model.output_dim() || phi.cols() != model.packed_dim()) {
    throw DimensionError("unpack_parameters: Phi is " +
                         std::to_string(phi.rows()) + "x" +
                         std::to_string(phi.cols()) + ", expected " +
                         std::to_string(model.output_dim()) + "x" +
                         std::to_string(model.packed_dim()));
  }
  for (int i = 0; i < model.cluster_count(); ++i) {
    model.locals[i].a = phi.middleCols(i * (nu + 1), nu);
    model.locals[i].b = phi.col(i * (nu + 1) + nu);
  }
}

EvolveOutcome evolve(CompositeStfModel& model, const Vec& u_stf, const Vec& y) {
  require_dim(u_stf, model.input_dim, "evolve regressor");
  require_dim(y, model.output_dim(), "evolve output");
  require_finite(u_stf, "evolve regressor");
  require_finite(y, "evolve output");

  const int joint = model.input_dim + model.output_dim();
  Vec xa(joint);
  xa << u_stf, y;

  auto spawn = [&](int nearest) {
    Cluster c;
    c.centroid = xa;
    c.xi = model.evolve_cfg.sigma0 * model.evolve_cfg.sigma0 *
           Mat::Identity(joint, joint);
    c.lambda = model.evolve_cfg.lambda0 *
               Mat::Identity(model.output_dim(), model.output_dim());
    c.sample_count = 1;
    model.clusters.push_back(std::move(c));
    LocalLinearModel local;
    if (nearest >= 0) {
      local = model.locals[nearest];
    } else {
      local.a = Mat::Zero(model.output_dim(), model.input_dim);
      local.b = Vec::Zero(model.output_dim());
    }
    model.locals.push_back(std::move(local));
    return EvolveOutcome{EvolveOutcome::kCreated, model.cluster_count() - 1};
  };

  if (model.cluster_count() == 0) return spawn(-1);

  const Vec d = all_dissimilarities(model, u_stf, &y);
  int best = 0;
  for (int i = 1; i < model.cluster_count(); ++i) {
    if (d[i] < d[best]) best = i;  // lowest index wins ties
  }
  if (d[best] > model.hyper.create_threshold &&
      model.cluster_count() < model.hyper.l_max) {
    return spawn(best);
  }

  Cluster& c = model.clusters[best];
  c.sample_count += 1;
  c.centroid += (xa - c.centroid) / static_cast<double>(c.sample_count);
  const double rho = model.evolve_cfg.rho;
  const Vec dx = xa - c.centroid;
  c.xi = rho * c.xi + (1.0 - rho) * (dx * dx.transpose());
  const Vec e = y - (model.locals[best].a * u_stf + model.locals[best].b);
  c.lambda = rho * c.lambda + (1.0 - rho) * (e * e.transpose());
  return EvolveOutcome{EvolveOutcome::kMatched, best};
}

std::string model_to_json(const CompositeStfModel& model) {
  json j;
  j["format"] = "dspc-stf-model";
  j["version"] = 1;
  j["hyper"] = {{"d_u", model.hyper.d_u},
                {"d_y", model.hyper.d_y},
                {"l_max", model.hyper.l_max},
                {"create_threshold", model.hyper.create_threshold},
                {"n_u", model.hyper.n_u},
                {"n_y", model.hyper.n_y}};
  j["evolve"] = {{"sigma0", model.evolve_cfg.sigma0},
                 {"lambda0", model.evolve_cfg.lambda0},
                 {"rho", model.evolve_cfg.rho}};
  j["input_dim"] = model.input_dim;
  j["norm_in"] = {{"mean", vec_to_json(model.norm_in.mean)},
                  {"scale", vec_to_json(model.norm_in.scale)}};
  j["norm_out"] = {{"mean", vec_to_json(model.norm_out.mean)},
                   {"scale", vec_to_json(model.norm_out.scale)}};
  json clusters = json::array();
  for (const Cluster& c : model.clusters) {
    clusters.push_back({{"centroid", vec_to_json(c.centroid)},
                        {"xi", mat_to_json(c.xi)},
                        {"lambda", mat_to_json(c.lambda)},
                        {"sample_count", c.sample_count}});
  }
  j["clusters"] = std::move(clusters);
  json locals = json::array();
  for (const LocalLinearModel& m : model.locals) {
    locals.push_back({{"a", mat_to_json(m.a)}, {"b", vec_to_json(m.b)}});
  }
  j["locals"] = std::move(locals);
  return j.dump(2);
}

CompositeStfModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "dspc-stf-model") {
      throw ConfigError("unexpected model file format tag");
    }
    if (j.at("version").get<int>() != 1) {
      throw ConfigError("unsupported model file version");
    }
    StfHyperParams h;
    h.d_u = j.at("hyper").at("d_u").get<int>();
    h.d_y = j.at("hyper").at("d_y").get<int>();
    h.l_max = j.at("hyper").at("l_max").get<int>();
    h.create_threshold = j.at("hyper").at("create_threshold").get<double>();
    h.n_u = j.at("hyper").at("n_u").get<int>();
    h.n_y = j.at("hyper").at("n_y").get<int>();
    EvolveConfig cfg;
    cfg.sigma0 = j.at("evolve").at("sigma0").get<double>();
    cfg.lambda0 = j.at("evolve").at("lambda0").get<double>();
    cfg.rho = j.at("evolve").at("rho").get<double>();
    CompositeStfModel m = CompositeStfModel::create(h, cfg);
    m.input_dim = j.at("input_dim").get<int>();
    m.norm_in.mean = vec_from_json(j.at("norm_in").at("mean"));
    m.norm_in.scale = vec_from_json(j.at("norm_in").at("scale"));
    m.norm_out.mean = vec_from_json(j.at("norm_out").at("mean"));
    m.norm_out.scale = vec_from_json(j.at("norm_out").at("scale"));
    for (const json& c : j.at("clusters")) {
      Cluster cl;
      cl.centroid = vec_from_json(c.at("centroid"));
      cl.xi = mat_from_json(c.at("xi"));
      cl.lambda = mat_from_json(c.at("lambda"));
      cl.sample_count = c.at("sample_count").get<long>();
      m.clusters.push_back(std::move(cl));
    }
    for (const json& lm : j.at("locals")) {
      LocalLinearModel local;
      local.a = mat_from_json(lm.at("a"));
      local.b = vec_from_json(lm.at("b"));
      m.locals.push_back(std::move(local));
    }
    if (m.clusters.size() != m.locals.size()) {
      throw ConfigError("model file: cluster/local count mismatch");
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file missing field: ") + e.what());
  }
}

void save_model(const CompositeStfModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << model_to_json(model) << "\n";
}

CompositeStfModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace dspc
