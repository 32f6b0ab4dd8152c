#include "cmeta/contrast.hpp"

namespace cmeta {

bool in_domain(Measure m, double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) return false;
  switch (m) {
    case Measure::RD: return true;
    case Measure::RR:
    case Measure::LogRR: return x > 0.0 && y > 0.0;
    case Measure::OR:
    case Measure::LogOR: return x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0;
  }
  return false;
}

}  // namespace cmeta
