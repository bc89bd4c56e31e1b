#include "vgicp/robust_kernel.hpp"

#include <algorithm>
#include <cmath>

namespace vgicp {

KernelValue apply_kernel(const RobustKernel& kernel, double squared_error) {
  if (squared_error < 0.0) throw std::invalid_argument("squared error must be nonnegative");

  double weight = 1.0;
  switch (kernel.kind) {
    case RobustKernel::Kind::none:
      break;
    case RobustKernel::Kind::huber: {
      const double x = std::sqrt(squared_error);
      weight = x <= kernel.huber_delta ? 1.0 : kernel.huber_delta / x;
      break;
    }
    case RobustKernel::Kind::shifted_tukey: {
      const double x = std::sqrt(squared_error);
      const double u = x - kernel.offset;
      const double t = std::max(0.0, 1.0 - u * u / kernel.width);
      weight = t * t;
      break;
    }
  }
  return {weight, weight * squared_error};
}

}  // namespace vgicp
