#include "rsctl/numerics.hpp"

#include <algorithm>

namespace rsctl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Simulation: return "simulation";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::NonConvergence: return "non-convergence";
  }
  return "unknown";
}

void add_warning(std::vector<Warning>& list, const std::string& code, const std::string& message, long count) {
  auto it = std::find_if(list.begin(), list.end(), [&](const Warning& w) { return w.code == code; });
  if (it == list.end()) {
    list.push_back({code, message, count});
  } else {
    it->count += count;
  }
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = std::min(x.size(), y.size());
  if (n < 2) throw NumericError("line fit needs at least two points");
  double mx = 0, my = 0;
  for (size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0) throw NumericError("line fit with coincident abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace rsctl
