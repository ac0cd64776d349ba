#include "fingrav/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace fingrav {

ComponentPower operator+(const ComponentPower& a, const ComponentPower& b) {
  return {a.total + b.total, a.xcd + b.xcd, a.iod + b.iod, a.hbm + b.hbm};
}

ComponentPower scale(const ComponentPower& p, double factor) {
  return {p.total * factor, p.xcd * factor, p.iod * factor, p.hbm * factor};
}

ComponentPower time_average(const ComponentPower& integral, Nanos duration) {
  if (duration <= 0) throw std::invalid_argument("time_average: non-positive duration");
  return scale(integral, 1.0 / static_cast<double>(duration));
}

bool valid_power(const ComponentPower& p) {
  if (p.total < 0 || p.xcd < 0 || p.iod < 0 || p.hbm < 0) return false;
  return p.total >= std::max({p.xcd, p.iod, p.hbm});
}

void require_valid_power(const ComponentPower& p, const char* what) {
  if (!valid_power(p)) {
    throw std::invalid_argument(std::string(what) +
                                ": power fields must be non-negative with total >= each component");
  }
}

const char* to_string(Phase p) {
  return p == Phase::sse ? "sse" : "ssp";
}

const char* to_string(Component c) {
  switch (c) {
    case Component::total: return "total";
    case Component::xcd: return "xcd";
    case Component::iod: return "iod";
    case Component::hbm: return "hbm";
  }
  return "total";
}

double component_value(const ComponentPower& p, Component c) {
  switch (c) {
    case Component::total: return p.total;
    case Component::xcd: return p.xcd;
    case Component::iod: return p.iod;
    case Component::hbm: return p.hbm;
  }
  return p.total;
}

}  // namespace fingrav
