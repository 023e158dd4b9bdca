#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace aerograph {

/// Right-tailed Gumbel (maxima): F(x) = exp(-exp(-(x - mu) / beta)).
struct GumbelFit {
  double mu = 0.0;
  double beta = 0.0;  // 0 when degenerate
  /// Fewer than three samples or all samples equal; mu is then the mean.
  bool degenerate = false;
  std::size_t iterations = 0;
};

inline constexpr double kGumbelTolerance = 1e-10;
inline constexpr std::size_t kGumbelMaxIterations = 100;

/// Maximum likelihood. beta solves the stationarity condition
///   beta = mean(x) - sum(x e^{-x/beta}) / sum(e^{-x/beta})
/// by Newton iteration from the moment estimate s * sqrt(6) / pi, then
///   mu = -beta * log(mean(e^{-x/beta})).
/// Throws NumericError (with the last iterate) if Newton does not converge,
/// ContractError on non-finite samples or an empty input.
GumbelFit fit_gumbel(std::span<const double> samples);

/// Sample from Gumbel(mu, beta) given a uniform u in (0, 1).
double gumbel_quantile(double u, double mu, double beta);

/// 1-based ranks in ascending order; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Throw ContractError unless lengths match and are >= 3, or when either
/// vector has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

struct PowerLawFit {
  double a = 0.0;  // y = a * x^b
  double b = 0.0;
  double r_fit = 0.0;  // Pearson(a x^b, y)
};

/// Least squares on (log x, log y). Requires x, y > 0.
PowerLawFit power_law_fit(std::span<const double> x, std::span<const double> y);

/// Median (mean of the middle pair for even sizes). Throws on empty input.
double median(std::span<const double> x);

}  // namespace aerograph
