#include "recap/design.hpp"

#include <algorithm>
#include <cmath>

namespace recap {

double logistic(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

std::optional<ModelFamily> parse_family(const std::string& token) {
  std::string t;
  t.reserve(token.size());
  for (const char c : token) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "m0") return ModelFamily::M0;
  if (t == "mt") return ModelFamily::Mt;
  if (t == "mb") return ModelFamily::Mb;
  if (t == "mtb") return ModelFamily::Mtb;
  if (t == "mh") return ModelFamily::Mh;
  if (t == "mht") return ModelFamily::Mht;
  if (t == "mhb") return ModelFamily::Mhb;
  if (t == "mhtb") return ModelFamily::Mhtb;
  return std::nullopt;
}

std::string family_token(ModelFamily family) {
  switch (family) {
    case ModelFamily::M0: return "m0";
    case ModelFamily::Mt: return "mt";
    case ModelFamily::Mb: return "mb";
    case ModelFamily::Mtb: return "mtb";
    case ModelFamily::Mh: return "mh";
    case ModelFamily::Mht: return "mht";
    case ModelFamily::Mhb: return "mhb";
    case ModelFamily::Mhtb: return "mhtb";
  }
  return "?";
}

bool ModelSpec::has_heterogeneity() const {
  return family == ModelFamily::Mh || family == ModelFamily::Mht ||
         family == ModelFamily::Mhb || family == ModelFamily::Mhtb;
}

bool ModelSpec::has_time() const {
  return family == ModelFamily::Mt || family == ModelFamily::Mtb ||
         family == ModelFamily::Mht || family == ModelFamily::Mhtb;
}

bool ModelSpec::has_behavior() const {
  return family == ModelFamily::Mb || family == ModelFamily::Mtb ||
         family == ModelFamily::Mhb || family == ModelFamily::Mhtb;
}

bool ModelSpec::has_intercept() const { return !has_time(); }

int ModelSpec::param_dim(int K) const {
  int s = 0;
  if (has_intercept()) s += 1;
  if (has_heterogeneity()) s += covariate_dim();
  if (has_time()) s += K;
  if (has_behavior()) s += 1;
  return s;
}

std::vector<std::string> ModelSpec::coef_names(
    int K, const std::vector<std::string>& covariate_names) const {
  std::vector<std::string> names;
  if (has_intercept()) names.emplace_back("const");
  if (has_heterogeneity())
    for (const int c : covariate_columns)
      names.push_back(c < static_cast<int>(covariate_names.size())
                          ? covariate_names[static_cast<size_t>(c)]
                          : "x" + std::to_string(c + 1));
  if (has_time())
    for (int k = 1; k <= K; ++k) names.push_back("t" + std::to_string(k));
  if (has_behavior()) names.emplace_back("b");
  return names;
}

void ModelSpec::validate() const {
  if (has_heterogeneity() && covariate_columns.empty())
    throw DataError("model family " + family_token(family) +
                    " requires at least one covariate column");
  if (!has_heterogeneity() && !covariate_columns.empty())
    throw DataError("model family " + family_token(family) +
                    " does not use covariates");
}

Eigen::VectorXd ModelSpec::select_covariates(const CaptureDataset& data, int i) const {
  Eigen::VectorXd x(covariate_dim());
  for (int j = 0; j < covariate_dim(); ++j) {
    const int c = covariate_columns[static_cast<size_t>(j)];
    if (c < 0 || c >= data.q())
      throw DataError("covariate column index " + std::to_string(c) + " out of range");
    x[j] = data.covariates(i, c);
  }
  return x;
}

namespace {

void fill_design(const ModelSpec& model, const Eigen::VectorXd& x, int K, int k,
                 double f, Eigen::VectorXd& out) {
  int pos = 0;
  if (model.has_intercept()) out[pos++] = 1.0;
  if (model.has_heterogeneity()) {
    out.segment(pos, x.size()) = x;
    pos += static_cast<int>(x.size());
  }
  if (model.has_time()) {
    out.segment(pos, K).setZero();
    out[pos + k] = 1.0;
    pos += K;
  }
  if (model.has_behavior()) out[pos++] = f;
}

}  // namespace

DesignVectors build_design(const ModelSpec& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXi& d, int K) {
  if (x.size() != model.covariate_dim())
    throw DataError("covariate vector dimension " + std::to_string(x.size()) +
                    " does not match model (expected " +
                    std::to_string(model.covariate_dim()) + ")");
  if (d.size() != K) throw DataError("history vector length does not match K");

  const int s = model.param_dim(K);
  DesignVectors dv;
  dv.z.assign(static_cast<size_t>(K), Eigen::VectorXd(s));
  dv.z0.assign(static_cast<size_t>(K), Eigen::VectorXd(s));
  bool captured_before = false;  // enduring memory: any capture strictly before k
  for (int k = 0; k < K; ++k) {
    fill_design(model, x, K, k, captured_before ? 1.0 : 0.0, dv.z[static_cast<size_t>(k)]);
    fill_design(model, x, K, k, 0.0, dv.z0[static_cast<size_t>(k)]);
    if (d[k] != 0) captured_before = true;
  }
  return dv;
}

double capture_prob(const Eigen::VectorXd& z, const Eigen::VectorXd& beta) {
  if (z.size() != beta.size())
    throw DataError("design/parameter dimension mismatch");
  return logistic(beta.dot(z));
}

double log_never_capture_prob(const ModelSpec& model, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& beta, int K) {
  if (beta.size() != model.param_dim(K))
    throw DataError("parameter vector dimension does not match model");
  const Eigen::VectorXi d = Eigen::VectorXi::Zero(K);
  const DesignVectors dv = build_design(model, x, d, K);
  double log_phi = 0.0;
  for (int k = 0; k < K; ++k)
    log_phi -= softplus(beta.dot(dv.z0[static_cast<size_t>(k)]));
  return log_phi;
}

double never_capture_prob(const ModelSpec& model, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& beta, int K) {
  return std::exp(log_never_capture_prob(model, x, beta, K));
}

}  // namespace recap
