#include "gadoa/estimation.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "gadoa/error.hpp"
#include "gadoa/features.hpp"

namespace gadoa {

double wrap_degrees(double deg) noexcept {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

double frame_estimate(std::span<const double> scores) {
  const std::size_t c = scores.size();
  if (c < 3) throw Error(ErrorKind::kFeatureShape, "frame_estimate needs at least 3 classes");
  std::size_t best = 0;
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::kNumeric, "non-finite class score");
    if (scores[i] > scores[best]) best = i;
  }
  const double left = scores[(best + c - 1) % c];
  const double right = scores[(best + 1) % c];
  const double delta = parabolic_peak(left, scores[best], right);
  return wrap_degrees((static_cast<double>(best) + delta) * 360.0 / static_cast<double>(c));
}

double circular_error(double estimate_deg, double truth_deg) noexcept {
  const double d = std::fmod(std::abs(estimate_deg - truth_deg), 360.0);
  return std::min(d, 360.0 - d);
}

double aggregate(std::span<const double> per_frame_deg) {
  if (per_frame_deg.empty()) throw Error(ErrorKind::kEmptyInput, "no frame estimates to aggregate");
  double best_angle = 0.0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (double candidate : per_frame_deg) {
    const double angle = wrap_degrees(candidate);
    double cost = 0.0;
    for (double other : per_frame_deg) cost += circular_error(angle, other);
    if (cost < best_cost || (cost == best_cost && angle < best_angle)) {
      best_cost = cost;
      best_angle = angle;
    }
  }
  return best_angle;
}

EvalResult evaluate(std::span<const Trial> trials, double epsilon_deg) {
  EvalResult r;
  r.epsilon = epsilon_deg;
  r.n_trials = trials.size();
  if (trials.empty()) return r;
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& t : trials) {
    const double d = circular_error(t.estimate_deg, t.truth_deg);
    r.deltas.push_back(d);
    sum += d;
    if (d <= epsilon_deg) ++hits;
  }
  const auto n = static_cast<double>(trials.size());
  r.mae = sum / n;
  r.accuracy = 100.0 * static_cast<double>(hits) / n;
  return r;
}

void write_eval_csv(std::ostream& out, std::span<const Trial> trials, const EvalResult& result) {
  out << "trial_id,theta_true,theta_est,delta\n" << std::setprecision(12);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out << i << ',' << trials[i].truth_deg << ',' << trials[i].estimate_deg << ','
        << result.deltas[i] << '\n';
  }
  out << "# summary\nN,MAE,Accuracy,epsilon\n"
      << result.n_trials << ',' << result.mae << ',' << result.accuracy << ',' << result.epsilon
      << '\n';
}

}  // namespace gadoa
