#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "recap/dataset.hpp"

namespace recap {

// The eight closed-population model families: any combination of time
// effects (t), individual heterogeneity (h), and an enduring behavioral
// response to first capture (b).
enum class ModelFamily { M0, Mt, Mb, Mtb, Mh, Mht, Mhb, Mhtb };

std::optional<ModelFamily> parse_family(const std::string& token);
std::string family_token(ModelFamily family);

struct ModelSpec {
  ModelFamily family = ModelFamily::Mh;
  // Indices into CaptureDataset::covariates used by h-families; must be
  // empty for families without heterogeneity.
  std::vector<int> covariate_columns;

  bool has_heterogeneity() const;
  bool has_time() const;
  bool has_behavior() const;
  // Families with a standalone intercept slot; for t-families the occasion
  // indicators play that role.
  bool has_intercept() const;

  int covariate_dim() const { return static_cast<int>(covariate_columns.size()); }

  // Parameter dimension s for a study with K occasions. Layout order is
  // intercept | covariates | occasion indicators | behavioral slot.
  int param_dim(int K) const;

  std::vector<std::string> coef_names(int K,
                                      const std::vector<std::string>& covariate_names) const;

  void validate() const;

  // The covariate sub-vector this model uses for individual i.
  Eigen::VectorXd select_covariates(const CaptureDataset& data, int i) const;
};

// Per-occasion design vectors for one individual: z[k] encodes the realized
// history (behavioral indicator set from earlier captures), z0[k] the
// never-captured counterpart with the behavioral entry forced to zero.
struct DesignVectors {
  std::vector<Eigen::VectorXd> z;
  std::vector<Eigen::VectorXd> z0;
};

DesignVectors build_design(const ModelSpec& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXi& d, int K);

// Overflow-safe logistic regression probability exp(b'z) / (1 + exp(b'z)).
double capture_prob(const Eigen::VectorXd& z, const Eigen::VectorXd& beta);

// Probability of never being captured over K occasions given covariate x:
// the product over occasions of one minus the never-captured capture
// probability. Strictly inside (0, 1) for finite parameters.
double never_capture_prob(const ModelSpec& model, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& beta, int K);
double log_never_capture_prob(const ModelSpec& model, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& beta, int K);

// Numerically stable scalar helpers shared by the likelihood code.
double logistic(double t);
double softplus(double t);  // log(1 + exp(t))

}  // namespace recap
