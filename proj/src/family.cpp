#include "svb/family.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace svb {

namespace {

// Lower-triangular row-major storage offsets within one component block.
inline int tri_index(int i, int j) { return i * (i + 1) / 2 + j; }

}  // namespace

MixtureFamily::MixtureFamily(int dim, int components)
    : dim_(dim), components_(components) {
  if (dim < 1) throw InvalidParameterError("family dimension must be >= 1");
  if (components < 1) throw InvalidParameterError("component count must be >= 1");
}

int MixtureFamily::lambda_size() const {
  return components_ * component_block() + components_;
}

Vec MixtureFamily::init_lambda(Rng* rng) const {
  Vec lambda = Vec::Zero(lambda_size());
  if (components_ > 1 && rng != nullptr) {
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (int k = 0; k < components_; ++k)
      for (int i = 0; i < dim_; ++i) lambda[k * component_block() + i] = jitter(*rng);
  }
  return lambda;
}

void MixtureFamily::validate(const Vec& lambda) const {
  if (lambda.size() != lambda_size())
    throw DimensionError("lambda length " + std::to_string(lambda.size()) +
                         " does not match family layout " + std::to_string(lambda_size()));
  if (!lambda.allFinite()) throw InvalidParameterError("lambda has non-finite entries");
}

MixtureFamily::Unpacked MixtureFamily::unpack(const Vec& lambda) const {
  validate(lambda);
  Unpacked u;
  u.mean.reserve(components_);
  u.scale.reserve(components_);
  const int block = component_block();
  for (int k = 0; k < components_; ++k) {
    const int base = k * block;
    u.mean.push_back(lambda.segment(base, dim_));
    Mat scale = Mat::Zero(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j <= i; ++j) {
        const double v = lambda[base + dim_ + tri_index(i, j)];
        scale(i, j) = (i == j) ? std::exp(v) : v;
      }
    u.scale.push_back(std::move(scale));
  }
  const Vec logits = lambda.tail(components_);
  u.log_weight = logits.array() - log_sum_exp(logits);
  return u;
}

DrawBatch MixtureFamily::sample(const Vec& lambda, int count, Rng& rng) const {
  if (count < 1) throw InvalidParameterError("sample count must be >= 1");
  const Unpacked u = unpack(lambda);
  Vec weights = u.log_weight.array().exp();
  std::discrete_distribution<int> pick(weights.data(), weights.data() + components_);
  std::normal_distribution<double> unit;

  DrawBatch batch;
  batch.draws.resize(count, dim_);
  batch.log_q.resize(count);
  Vec z(dim_);
  for (int s = 0; s < count; ++s) {
    const int k = components_ == 1 ? 0 : pick(rng);
    for (int i = 0; i < dim_; ++i) z[i] = unit(rng);
    batch.draws.row(s) = (u.mean[k] + u.scale[k].template triangularView<Eigen::Lower>() * z).transpose();
    batch.log_q[s] = log_density(u, batch.draws.row(s).transpose());
  }
  return batch;
}

Vec MixtureFamily::component_scores(const Unpacked& u, const Vec& theta) const {
  Vec logs(components_);
  for (int k = 0; k < components_; ++k) {
    const Vec v = theta - u.mean[k];
    const Vec white = u.scale[k].template triangularView<Eigen::Lower>().solve(v);
    double log_det = 0.0;
    for (int i = 0; i < dim_; ++i) log_det += std::log(u.scale[k](i, i));
    logs[k] = u.log_weight[k] - 0.5 * dim_ * kLogTwoPi - log_det - 0.5 * white.squaredNorm();
  }
  return logs;
}

double MixtureFamily::log_density(const Vec& lambda, const Vec& theta) const {
  return log_density(unpack(lambda), theta);
}

double MixtureFamily::log_density(const Unpacked& u, const Vec& theta) const {
  if (theta.size() != dim_) throw DimensionError("theta dimension mismatch");
  return log_sum_exp(component_scores(u, theta));
}

Vec MixtureFamily::score(const Vec& lambda, const Vec& theta) const {
  return score(unpack(lambda), theta);
}

Vec MixtureFamily::score(const Unpacked& u, const Vec& theta) const {
  if (theta.size() != dim_) throw DimensionError("theta dimension mismatch");
  const Vec logs = component_scores(u, theta);
  const double total = log_sum_exp(logs);
  const Vec resp = (logs.array() - total).exp();

  Vec grad = Vec::Zero(lambda_size());
  const int block = component_block();
  for (int k = 0; k < components_; ++k) {
    const int base = k * block;
    const auto lower = u.scale[k].template triangularView<Eigen::Lower>();
    const Vec white = lower.solve(theta - u.mean[k]);
    const Vec mean_grad = lower.transpose().solve(white);
    grad.segment(base, dim_) = resp[k] * mean_grad;

    // d log N / dL = L^{-T} (w w' - I), restricted to the lower triangle
    Mat rhs = white * white.transpose() - Mat::Identity(dim_, dim_);
    Mat scale_grad = lower.transpose().solve(rhs);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j <= i; ++j) {
        double g = resp[k] * scale_grad(i, j);
        if (i == j) g *= u.scale[k](i, i);  // chain rule through log storage
        grad[base + dim_ + tri_index(i, j)] = g;
      }
  }
  const Vec weights = u.log_weight.array().exp();
  grad.tail(components_) = resp - weights;
  return grad;
}

std::pair<MixtureFamily, Vec> MixtureFamily::conditional(const Vec& lambda,
                                                         const std::vector<int>& fixed,
                                                         const Vec& values) const {
  if (components_ != 1) throw InvalidParameterError("conditional requires a single component");
  validate(lambda);
  if (static_cast<int>(fixed.size()) != values.size())
    throw DimensionError("fixed index and value counts differ");
  std::vector<bool> is_fixed(dim_, false);
  for (int idx : fixed) {
    if (idx < 0 || idx >= dim_) throw DimensionError("fixed index out of range");
    if (is_fixed[idx]) throw InvalidParameterError("duplicate fixed index");
    is_fixed[idx] = true;
  }
  std::vector<int> free;
  for (int i = 0; i < dim_; ++i)
    if (!is_fixed[i]) free.push_back(i);
  if (free.empty()) throw InvalidParameterError("no free coordinates remain");
  if (fixed.empty()) return {*this, lambda};

  const Vec mu = mean_of(lambda);
  const Mat sigma = covariance_of(lambda);
  const int nf = static_cast<int>(free.size());
  const int nc = static_cast<int>(fixed.size());
  Mat s_ff(nc, nc), s_rf(nf, nc), s_rr(nf, nf);
  Vec mu_f(nc), mu_r(nf);
  for (int a = 0; a < nc; ++a) {
    mu_f[a] = mu[fixed[a]];
    for (int b = 0; b < nc; ++b) s_ff(a, b) = sigma(fixed[a], fixed[b]);
  }
  for (int a = 0; a < nf; ++a) {
    mu_r[a] = mu[free[a]];
    for (int b = 0; b < nc; ++b) s_rf(a, b) = sigma(free[a], fixed[b]);
    for (int b = 0; b < nf; ++b) s_rr(a, b) = sigma(free[a], free[b]);
  }
  Eigen::LLT<Mat> llt(s_ff);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fixed-block covariance is not positive definite");
  const Mat gain = llt.solve(s_rf.transpose()).transpose();  // Sigma_rf Sigma_ff^-1
  const Vec cond_mean = mu_r + gain * (values - mu_f);
  const Mat cond_cov = s_rr - gain * s_rf.transpose();

  Eigen::LLT<Mat> cond_llt(cond_cov);
  if (cond_llt.info() != Eigen::Success)
    throw NumericalError("conditional covariance is not positive definite");
  const Mat l = cond_llt.matrixL();

  MixtureFamily out(nf, 1);
  Vec out_lambda = Vec::Zero(out.lambda_size());
  out_lambda.head(nf) = cond_mean;
  for (int i = 0; i < nf; ++i)
    for (int j = 0; j <= i; ++j)
      out_lambda[nf + tri_index(i, j)] = (i == j) ? std::log(l(i, i)) : l(i, j);
  return {out, out_lambda};
}

std::pair<MixtureFamily, Vec> MixtureFamily::marginal(const Vec& lambda,
                                                      const std::vector<int>& keep) const {
  if (components_ != 1) throw InvalidParameterError("marginal requires a single component");
  validate(lambda);
  if (keep.empty()) throw InvalidParameterError("marginal over an empty set");
  const Vec mu = mean_of(lambda);
  const Mat sigma = covariance_of(lambda);
  const int n = static_cast<int>(keep.size());
  Vec m(n);
  Mat s(n, n);
  for (int a = 0; a < n; ++a) {
    if (keep[a] < 0 || keep[a] >= dim_) throw DimensionError("keep index out of range");
    m[a] = mu[keep[a]];
    for (int b = 0; b < n; ++b) s(a, b) = sigma(keep[a], keep[b]);
  }
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("marginal covariance is not positive definite");
  const Mat l = llt.matrixL();
  MixtureFamily out(n, 1);
  Vec out_lambda = Vec::Zero(out.lambda_size());
  out_lambda.head(n) = m;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      out_lambda[n + tri_index(i, j)] = (i == j) ? std::log(l(i, i)) : l(i, j);
  return {out, out_lambda};
}

Vec MixtureFamily::mean_of(const Vec& lambda) const {
  if (components_ != 1) throw InvalidParameterError("moments defined for a single component");
  return lambda.head(dim_);
}

Mat MixtureFamily::covariance_of(const Vec& lambda) const {
  const Unpacked u = unpack(lambda);
  if (components_ != 1) throw InvalidParameterError("moments defined for a single component");
  return u.scale[0] * u.scale[0].transpose();
}

Vec MixtureFamily::grow(const Vec& lambda, const Vec& new_mean, double new_sd) const {
  if (components_ != 1) throw InvalidParameterError("grow requires a single component");
  validate(lambda);
  if (new_sd <= 0.0) throw InvalidParameterError("new-block standard deviation must be positive");
  const int extra = static_cast<int>(new_mean.size());
  MixtureFamily out(dim_ + extra, 1);
  Vec out_lambda = Vec::Zero(out.lambda_size());
  out_lambda.head(dim_) = lambda.head(dim_);
  out_lambda.segment(dim_, extra) = new_mean;
  const int d = out.dim();
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j <= i; ++j)
      out_lambda[d + tri_index(i, j)] = lambda[dim_ + tri_index(i, j)];
  for (int i = dim_; i < d; ++i) out_lambda[d + tri_index(i, i)] = std::log(new_sd);
  return out_lambda;
}

std::string MixtureFamily::to_json(const Vec& lambda) const {
  validate(lambda);
  nlohmann::json j;
  j["dim"] = dim_;
  j["components"] = components_;
  j["lambda"] = std::vector<double>(lambda.data(), lambda.data() + lambda.size());
  return j.dump();
}

std::pair<MixtureFamily, Vec> MixtureFamily::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MixtureFamily family(j.at("dim").get<int>(), j.at("components").get<int>());
  const auto values = j.at("lambda").get<std::vector<double>>();
  Vec lambda = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
  family.validate(lambda);
  return {family, lambda};
}

}  // namespace svb
