#pragma once

namespace stepnav {

/// Classical speed-threshold step selection: the fine step above the
/// threshold, the coarse one at or below it.
inline double baseline_policy(double speed, double threshold, double dt_min, double dt_max) {
  return speed > threshold ? dt_min : dt_max;
}

}  // namespace stepnav
