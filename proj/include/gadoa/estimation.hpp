#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gadoa {

/// Wraps an angle into [0, 360).
double wrap_degrees(double deg) noexcept;

/// Argmax class (ties -> lowest index) refined by a parabola through its
/// circular neighbours; returns (I + delta) * 360 / C wrapped to [0, 360).
/// Throws kNumeric on non-finite scores.
double frame_estimate(std::span<const double> scores);

/// Circular median: the sample minimising the summed circular distance to
/// all samples (ties -> smallest angle). Throws kEmptyInput when empty.
double aggregate(std::span<const double> per_frame_deg);

struct DoaEstimate {
  std::vector<double> per_frame;
  double global = 0.0;
};

/// Absolute angular error with wrap-around, in [0, 180].
double circular_error(double estimate_deg, double truth_deg) noexcept;

struct Trial {
  double estimate_deg = 0.0;
  double truth_deg = 0.0;
};

struct EvalResult {
  std::vector<double> deltas;
  double mae = 0.0;
  double accuracy = 0.0;  // percent
  std::size_t n_trials = 0;
  double epsilon = 5.0;
};

/// MAE and Accuracy with an inclusive tolerance (delta <= epsilon counts).
EvalResult evaluate(std::span<const Trial> trials, double epsilon_deg = 5.0);

/// Per-trial rows "trial_id,theta_true,theta_est,delta" followed by a
/// "# summary" line and "N,MAE,Accuracy,epsilon".
void write_eval_csv(std::ostream& out, std::span<const Trial> trials, const EvalResult& result);

}  // namespace gadoa
