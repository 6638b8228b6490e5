#include "watchsim/addiction.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "watchsim/errors.hpp"

namespace watchsim {

StockMode stock_mode_from_string(const std::string& s) {
  if (s == "recurrence") return StockMode::recurrence;
  if (s == "literal") return StockMode::literal;
  throw ValidationError("unknown stock mode: " + s);
}

const char* to_string(StockMode mode) {
  return mode == StockMode::recurrence ? "recurrence" : "literal";
}

double consumption_transform(double watch_time_seconds) {
  if (watch_time_seconds < 0.0) {
    throw ValidationError("consumption_transform: watch time must be >= 0");
  }
  return std::log10(1.0 + watch_time_seconds);
}

double inverse_consumption(double c) { return std::pow(10.0, c) - 1.0; }

std::vector<double> addiction_stock(std::span<const double> c, double sigma,
                                    StockMode mode) {
  if (sigma <= 0.0 || sigma >= 1.0) {
    throw ValidationError("addiction_stock: sigma must lie in (0, 1)");
  }
  for (double v : c) {
    if (v < 0.0) throw ValidationError("addiction_stock: consumption must be >= 0");
  }
  std::vector<double> stock(c.size(), 0.0);
  if (c.empty()) return stock;
  if (mode == StockMode::recurrence) {
    for (std::size_t k = 1; k < c.size(); ++k) {
      stock[k] = (1.0 - sigma) * stock[k - 1] + c[k - 1];
    }
  } else {
    // Position-weighted sum, 1-based exponent.
    for (std::size_t k = 1; k < c.size(); ++k) {
      double acc = 0.0;
      double weight = 1.0;
      for (std::size_t j = 1; j <= k; ++j) {
        weight *= (1.0 - sigma);
        acc += weight * c[j - 1];
      }
      stock[k] = acc;
    }
  }
  return stock;
}

double stock_after(std::span<const double> c, double sigma, StockMode mode) {
  if (c.empty()) return 0.0;
  if (mode == StockMode::recurrence) {
    double t = 0.0;
    for (double v : c) t = (1.0 - sigma) * t + v;
    return t;
  }
  double acc = 0.0;
  double weight = 1.0;
  for (double v : c) {
    weight *= (1.0 - sigma);
    acc += weight * v;
  }
  return acc;
}

ConsumptionSeries make_series(std::span<const double> c, double sigma,
                              StockMode mode) {
  ConsumptionSeries series;
  series.c.assign(c.begin(), c.end());
  series.stock = addiction_stock(c, sigma, mode);
  series.sigma = sigma;
  return series;
}

double utility(const AddictionParams& params, double c, double t_stock) {
  return params.a * c - 0.5 * params.b * c * c + params.w * c * t_stock;
}

namespace {

// 3x3 solve with partial pivoting; throws on rank deficiency.
std::array<double, 3> solve3(std::array<std::array<double, 4>, 3> m) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    }
    if (std::fabs(m[pivot][col]) < 1e-12) {
      throw ValidationError(
          "fit_addiction: design matrix is rank-deficient; "
          "retry with ridge_lambda > 0");
    }
    std::swap(m[col], m[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      double f = m[r][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double acc = m[r][3];
    for (int k = r + 1; k < 3; ++k) acc -= m[r][k] * x[k];
    x[r] = acc / m[r][r];
  }
  return x;
}

}  // namespace

AddictionParams fit_addiction(std::span<const double> targets,
                              std::span<const double> c,
                              std::span<const double> stock,
                              double ridge_lambda) {
  if (targets.size() != c.size() || c.size() != stock.size()) {
    throw ValidationError("fit_addiction: target/series length mismatch");
  }
  if (targets.size() < 3) {
    throw ValidationError("fit_addiction: need at least 3 observations");
  }
  if (ridge_lambda < 0.0) {
    throw ValidationError("fit_addiction: ridge_lambda must be >= 0");
  }

  // Normal equations (X'X + lambda I) theta = X'y, rows [C, -C^2/2, C*T].
  std::array<std::array<double, 4>, 3> m{};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double x0 = c[i];
    const double x1 = -0.5 * c[i] * c[i];
    const double x2 = c[i] * stock[i];
    const double y = targets[i];
    const std::array<double, 3> row{x0, x1, x2};
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) m[r][k] += row[r] * row[k];
      m[r][3] += row[r] * y;
    }
  }
  for (int r = 0; r < 3; ++r) m[r][r] += ridge_lambda;

  const auto theta = solve3(m);

  AddictionParams params;
  params.a = theta[0];
  params.b = theta[1];
  params.w = theta[2];
  params.ridge_lambda = ridge_lambda;
  params.n_obs = targets.size();
  double sse = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double err = targets[i] - utility(params, c[i], stock[i]);
    sse += err * err;
  }
  params.residual_mse = sse / static_cast<double>(targets.size());
  return params;
}

AddictionParams fit_addiction(std::span<const double> targets,
                              const std::vector<ConsumptionSeries>& series,
                              double ridge_lambda) {
  std::vector<double> c;
  std::vector<double> stock;
  for (const auto& s : series) {
    c.insert(c.end(), s.c.begin(), s.c.end());
    stock.insert(stock.end(), s.stock.begin(), s.stock.end());
  }
  return fit_addiction(targets, c, stock, ridge_lambda);
}

AddictionMetrics addiction_metrics(const AddictionParams& params) {
  if (params.b == 0.0) {
    throw ValidationError("addiction_metrics: b must be nonzero");
  }
  AddictionMetrics m;
  m.degree = params.w;
  m.peak_consumption = params.a / params.b;
  m.peak_minutes = inverse_consumption(m.peak_consumption) / 60.0;
  m.addicted = params.w > 0.0;
  return m;
}

std::vector<CurvePoint> utility_curve(const AddictionParams& params,
                                      const ConsumptionSeries& series) {
  std::vector<CurvePoint> curve;
  curve.reserve(series.c.size());
  double minutes = 0.0;
  double total_utility = 0.0;
  for (std::size_t j = 0; j < series.c.size(); ++j) {
    minutes += inverse_consumption(series.c[j]) / 60.0;
    total_utility += utility(params, series.c[j], series.stock[j]);
    curve.push_back({minutes, total_utility});
  }
  return curve;
}

}  // namespace watchsim
