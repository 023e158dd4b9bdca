#include "aerograph/analysis/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "aerograph/errors.hpp"

namespace aerograph {
namespace {

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw ContractError(std::string(what) + ": lengths differ (" + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()) + ")");
  }
  if (x.size() < 3) throw ContractError(std::string(what) + ": need at least 3 points");
}

// Weighted mean and variance of x under w_i = exp(-(x_i - lo) / beta).
// Shifting by the minimum keeps every weight in (0, 1].
struct Weighted {
  double mean;
  double variance;
  double log_mean_weight;  // log(mean(w))
};

Weighted weighted(std::span<const double> x, double lo, double beta) {
  double sw = 0.0, sx = 0.0;
  for (double v : x) {
    const double w = std::exp(-(v - lo) / beta);
    sw += w;
    sx += w * v;
  }
  const double m = sx / sw;
  double sv = 0.0;
  for (double v : x) sv += std::exp(-(v - lo) / beta) * (v - m) * (v - m);
  return {m, sv / sw, std::log(sw / static_cast<double>(x.size()))};
}

}  // namespace

GumbelFit fit_gumbel(std::span<const double> samples) {
  if (samples.empty()) throw ContractError("fit_gumbel: no samples");
  for (double v : samples) {
    if (!std::isfinite(v)) throw ContractError("fit_gumbel: non-finite sample");
  }
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  GumbelFit fit;
  const double mean = mean_of(samples);
  if (samples.size() < 3 || *lo_it == *hi_it) {
    fit.degenerate = true;
    fit.mu = *lo_it == *hi_it ? lo : mean;
    return fit;
  }

  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  double beta = sd * std::sqrt(6.0) / std::numbers::pi;

  // g(beta) = beta - mean + E_w[x], g'(beta) = 1 + Var_w[x] / beta^2 > 0.
  for (std::size_t it = 1; it <= kGumbelMaxIterations; ++it) {
    const Weighted w = weighted(samples, lo, beta);
    const double g = beta - mean + w.mean;
    const double dg = 1.0 + w.variance / (beta * beta);
    double next = beta - g / dg;
    if (!(next > 0.0)) next = beta / 2.0;
    const double step = std::abs(next - beta);
    beta = next;
    if (step <= kGumbelTolerance * beta) {
      fit.beta = beta;
      fit.mu = lo - beta * weighted(samples, lo, beta).log_mean_weight;
      fit.iterations = it;
      return fit;
    }
  }
  std::ostringstream msg;
  msg << "fit_gumbel: Newton did not converge in " << kGumbelMaxIterations << " iterations (n=" << samples.size()
      << ", beta=" << beta << ", sd=" << sd << ")";
  throw NumericError(msg.str());
}

double gumbel_quantile(double u, double mu, double beta) { return mu - beta * std::log(-std::log(u)); }

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ContractError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "spearman");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

PowerLawFit power_law_fit(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "power_law_fit");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw ContractError("power_law_fit: x and y must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = mean_of(lx), my = mean_of(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw ContractError("power_law_fit: zero variance in x");
  PowerLawFit fit;
  fit.b = sxy / sxx;
  fit.a = std::exp(my - fit.b * mx);
  std::vector<double> fitted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fitted[i] = fit.a * std::pow(x[i], fit.b);
  fit.r_fit = pearson(fitted, y);
  return fit;
}

double median(std::span<const double> x) {
  if (x.empty()) throw ContractError("median: empty input");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

}  // namespace aerograph
