#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>

namespace rpchain {

enum class InteractionKind { none, nearest, power_law, table };

inline std::string to_string(InteractionKind k)
{
  switch (k) {
    case InteractionKind::none: return "none";
    case InteractionKind::nearest: return "nearest";
    case InteractionKind::power_law: return "power_law";
    case InteractionKind::table: return "table";
  }
  return "none";
}

/// Density-density interaction U(j) on the chain.
struct InteractionSpec {
  InteractionKind kind = InteractionKind::none;
  double strength = 0.0;        // U for the nearest-neighbour kind
  double alpha = 1.0;           // decay exponent for power_law
  double amplitude = 1.0;       // prefactor for power_law
  std::map<long, double> table; // j -> U(j), must be symmetric with U(0)=0

  static InteractionSpec none_kind() { return {}; }

  static InteractionSpec nearest(double U)
  {
    if (!(U >= 0.0)) throw std::invalid_argument("nearest interaction requires U >= 0");
    InteractionSpec s;
    s.kind = InteractionKind::nearest;
    s.strength = U;
    return s;
  }

  static InteractionSpec power_law(double alpha, double amplitude = 1.0)
  {
    if (!(alpha > 0.0)) throw std::invalid_argument("power_law requires alpha > 0");
    if (!(amplitude > 0.0)) throw std::invalid_argument("power_law requires amplitude > 0");
    InteractionSpec s;
    s.kind = InteractionKind::power_law;
    s.alpha = alpha;
    s.amplitude = amplitude;
    return s;
  }

  /// Rejects asymmetric tables and a nonzero U(0) instead of repairing them.
  static InteractionSpec from_table(const std::map<long, double>& values)
  {
    for (const auto& [j, v] : values) {
      if (!std::isfinite(v)) throw std::invalid_argument("table entry is not finite");
      if (j == 0 && v != 0.0) throw std::invalid_argument("table requires U(0) = 0");
      auto it = values.find(-j);
      double mirror = (it == values.end()) ? 0.0 : it->second;
      if (mirror != v)
        throw std::invalid_argument("table is not symmetric at j=" + std::to_string(j));
    }
    InteractionSpec s;
    s.kind = InteractionKind::table;
    s.table = values;
    return s;
  }
};

/// U(j). Zero at j=0 and symmetric in j for every kind.
inline double u_of(const InteractionSpec& spec, long j)
{
  if (j == 0) return 0.0;
  const long a = std::labs(j);
  switch (spec.kind) {
    case InteractionKind::none: return 0.0;
    case InteractionKind::nearest: return a == 1 ? spec.strength : 0.0;
    case InteractionKind::power_law: {
      const double sign = (a % 2 == 0) ? -1.0 : 1.0; // (-1)^{j+1}
      return sign * spec.amplitude * std::pow(static_cast<double>(a), -spec.alpha);
    }
    case InteractionKind::table: {
      auto it = spec.table.find(j);
      return it == spec.table.end() ? 0.0 : it->second;
    }
  }
  return 0.0;
}

/// W(j) = (-1)^{j+1} U(j), the interaction seen after the hole-particle transform.
inline double w_of(const InteractionSpec& spec, long j)
{
  const double sign = (std::labs(j) % 2 == 0) ? -1.0 : 1.0;
  return sign * u_of(spec, j);
}

} // namespace rpchain
