#include "afm/scheduler.hpp"

#include <stdexcept>

#include "afm/core.hpp"

namespace afm {

KappaPoint kappa(const Scheduler& scheduler, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::domain_error("scheduler time outside [0,1]");
  switch (scheduler.kind) {
    case SchedulerKind::Linear:
      return {t, 1.0};
    case SchedulerKind::Quadratic:
      return {t * t, 2.0 * t};
  }
  throw ConfigError("unknown scheduler kind");
}

const char* to_string(SchedulerKind kind) {
  return kind == SchedulerKind::Linear ? "linear" : "quadratic";
}

SchedulerKind scheduler_kind_from_string(const std::string& name) {
  if (name == "linear") return SchedulerKind::Linear;
  if (name == "quadratic") return SchedulerKind::Quadratic;
  throw ConfigError("unknown scheduler kind: " + name);
}

}  // namespace afm
