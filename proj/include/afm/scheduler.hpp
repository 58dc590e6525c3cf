#pragma once

#include <string>

namespace afm {

enum class SchedulerKind { Linear, Quadratic };

// Monotone time scheduler with kappa(0) = 0 and kappa(1) = 1.
struct Scheduler {
  SchedulerKind kind = SchedulerKind::Linear;
};

struct KappaPoint {
  double kappa;
  double rate;  // d kappa / dt
};

// Evaluates kappa and its derivative; throws std::domain_error outside [0,1].
KappaPoint kappa(const Scheduler& scheduler, double t);

const char* to_string(SchedulerKind kind);
SchedulerKind scheduler_kind_from_string(const std::string& name);

}  // namespace afm
