#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace watchsim {

// How the addiction stock accumulates past consumption.
//   recurrence: T[k] = (1 - sigma) * T[k-1] + C[k-1], T[0] = 0
//   literal:    T[k] = sum_{j=1..k-1} (1 - sigma)^j * C[j-1]  (position-weighted)
enum class StockMode { recurrence, literal };

StockMode stock_mode_from_string(const std::string& s);
const char* to_string(StockMode mode);

// Consumption units: C = log10(1 + watch_time_seconds).
double consumption_transform(double watch_time_seconds);
double inverse_consumption(double c);  // 10^C - 1

// Per-session consumption path and the stock it induces.
struct ConsumptionSeries {
  std::vector<double> c;      // C_j, consumption per video
  std::vector<double> stock;  // T_j, addiction capital before video j
  double sigma = 0.9;
};

std::vector<double> addiction_stock(std::span<const double> c, double sigma,
                                    StockMode mode = StockMode::recurrence);

// Stock carried into the video *after* the given consumption history.
double stock_after(std::span<const double> c, double sigma,
                   StockMode mode = StockMode::recurrence);

ConsumptionSeries make_series(std::span<const double> c, double sigma,
                              StockMode mode = StockMode::recurrence);

// Fitted quadratic-utility coefficients plus solve diagnostics.
struct AddictionParams {
  double a = 0.0;  // marginal benefit of initial consumption
  double b = 0.0;  // diminishing satiation
  double w = 0.0;  // reinforcement from past consumption
  double residual_mse = 0.0;
  std::size_t n_obs = 0;
  double ridge_lambda = 0.0;
};

// u(C, T) = a*C - b/2*C^2 + w*C*T
double utility(const AddictionParams& params, double c, double t_stock);

// Regularized least squares of targets on rows [C, -C^2/2, C*T].
// Throws ValidationError on a singular system when ridge_lambda == 0,
// advising a positive lambda.
AddictionParams fit_addiction(std::span<const double> targets,
                              std::span<const double> c,
                              std::span<const double> stock,
                              double ridge_lambda = 1e-8);

AddictionParams fit_addiction(std::span<const double> targets,
                              const std::vector<ConsumptionSeries>& series,
                              double ridge_lambda = 1e-8);

struct AddictionMetrics {
  double degree = 0.0;            // = w
  double peak_consumption = 0.0;  // = a/b, log-consumption units
  double peak_minutes = 0.0;      // (10^(a/b) - 1) / 60
  bool addicted = false;          // w > 0
};

AddictionMetrics addiction_metrics(const AddictionParams& params);

// Cumulative (minutes watched, utility) points for one session.
struct CurvePoint {
  double cumulative_minutes = 0.0;
  double cumulative_utility = 0.0;
};

std::vector<CurvePoint> utility_curve(const AddictionParams& params,
                                      const ConsumptionSeries& series);

}  // namespace watchsim
