#include "llmctl/arx.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace llmctl {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

// Design row for one window: T_t..T_{t-p+1}, u_h,t..u_h,t-q+1, u_f,t..u_f,t-q+1.
void fill_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, const WindowSample& w, std::size_t p, std::size_t q) {
  const std::size_t L = w.features.size();
  for (std::size_t i = 0; i < p; ++i) row(i) = w.features[L - 1 - i].T;
  for (std::size_t j = 0; j < q; ++j) {
    row(p + j) = w.features[L - 1 - j].u.heater();
    row(p + q + j) = w.features[L - 1 - j].u.fan_on();
  }
}

}  // namespace

void ArxModel::validate() const {
  if (b_h.size() != b_f.size()) throw ValidationError("ARX heater and fan horizons differ");
  if (a.empty() && b_h.empty()) throw ValidationError("ARX model has no coefficients");
  for (const auto* v : {&a, &b_h, &b_f}) {
    for (double c : *v) {
      if (!std::isfinite(c)) throw ValidationError("ARX coefficient is not finite");
    }
  }
}

ArxSingularError::ArxSingularError(std::vector<std::string> columns)
    : Error("ARX design matrix is rank deficient; dependent columns: " + join(columns)),
      columns_(std::move(columns)) {}

std::vector<std::string> arx_column_names(std::size_t p, std::size_t q) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= p; ++i) names.push_back("a_" + std::to_string(i));
  for (std::size_t j = 1; j <= q; ++j) names.push_back("b_h_" + std::to_string(j));
  for (std::size_t j = 1; j <= q; ++j) names.push_back("b_f_" + std::to_string(j));
  return names;
}

ArxFit fit_arx(std::span<const WindowSample> samples, std::size_t p, std::size_t q, ArxFitOptions opts) {
  const std::size_t cols = p + 2 * q;
  if (cols == 0) throw ValidationError("ARX needs p + q >= 1");
  if (samples.size() <= cols) {
    throw ValidationError("ARX fit needs more than " + std::to_string(cols) + " samples, got " +
                          std::to_string(samples.size()));
  }
  for (const auto& w : samples) {
    if (w.features.size() < std::max(p, q)) throw ValidationError("window shorter than the ARX horizons");
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(cols));
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    fill_row(X.row(r), samples[r], p, q);
    y(r) = samples[r].label;
  }

  ArxFit fit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::VectorXd theta;
  if (qr.rank() == static_cast<Eigen::Index>(cols)) {
    theta = qr.solve(y);
  } else {
    const auto names = arx_column_names(p, q);
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) fit.dependent_columns.push_back(names[perm(k)]);
    if (opts.strict) throw ArxSingularError(fit.dependent_columns);
    Eigen::MatrixXd gram = X.transpose() * X;
    const double scale = std::max(gram.diagonal().mean(), 1.0);
    gram.diagonal().array() += opts.ridge * scale;
    theta = gram.ldlt().solve(X.transpose() * y);
  }

  fit.model.a.assign(theta.data(), theta.data() + p);
  fit.model.b_h.assign(theta.data() + p, theta.data() + p + q);
  fit.model.b_f.assign(theta.data() + p + q, theta.data() + cols);
  fit.model.validate();
  fit.sse = (X * theta - y).squaredNorm();
  return fit;
}

double arx_predict(const ArxModel& model, std::span<const double> T_hist, std::span<const ControlInput> u_hist) {
  const std::size_t p = model.p(), q = model.q();
  if (T_hist.size() < p || u_hist.size() < q) throw ValidationError("history too short for ARX prediction");
  double y = 0;
  for (std::size_t i = 0; i < p; ++i) y += model.a[i] * T_hist[T_hist.size() - 1 - i];
  for (std::size_t j = 0; j < q; ++j) {
    const ControlInput u = u_hist[u_hist.size() - 1 - j];
    y += model.b_h[j] * u.heater() + model.b_f[j] * u.fan_on();
  }
  return y;
}

double arx_training_sse(const ArxModel& model, std::span<const WindowSample> samples) {
  double sse = 0;
  std::vector<double> T;
  std::vector<ControlInput> u;
  for (const auto& w : samples) {
    T.clear();
    u.clear();
    for (const auto& s : w.features) {
      T.push_back(s.T);
      u.push_back(s.u);
    }
    const double e = arx_predict(model, T, u) - w.label;
    sse += e * e;
  }
  return sse;
}

ArxPredictor::ArxPredictor(ArxModel model) : model_(std::move(model)) { model_.validate(); }

std::size_t ArxPredictor::history_length() const { return std::max<std::size_t>({model_.p(), model_.q(), 1}); }

double ArxPredictor::predict_next(std::span<const StateSample> history) const {
  const auto w = tail_window(history, history_length());
  std::vector<double> T;
  std::vector<ControlInput> u;
  for (const auto& s : w) {
    T.push_back(s.T);
    u.push_back(s.u);
  }
  return arx_predict(model_, T, u);
}

}  // namespace llmctl
