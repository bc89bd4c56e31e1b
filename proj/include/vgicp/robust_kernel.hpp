#pragma once

#include <stdexcept>

namespace vgicp {

/// IRLS robust kernel descriptor.
///
/// shifted_tukey is a weight bump centered away from zero error:
///   weight(x) = (max(0, 1 - (x - offset)^2 / width))^2,  x = sqrt(e^2).
/// It is 1 at x == offset, falls to 0 at |x - offset| >= sqrt(width), and is
/// 0 at x == 0 whenever offset^2 >= width, leaving an already-satisfied
/// constraint dormant and cutting off far outliers.
struct RobustKernel {
  enum class Kind { none, huber, shifted_tukey };

  Kind kind = Kind::none;
  double width = 1.0;        // shifted_tukey width w, squared-error units
  double offset = 1.0;       // shifted_tukey shift, error units
  double huber_delta = 1.0;  // huber transition point

  static RobustKernel none() { return {}; }

  static RobustKernel huber(double delta) {
    if (delta <= 0.0) throw std::invalid_argument("huber delta must be positive");
    RobustKernel k;
    k.kind = Kind::huber;
    k.huber_delta = delta;
    return k;
  }

  static RobustKernel shifted_tukey(double width, double offset) {
    if (width <= 0.0) throw std::invalid_argument("tukey width must be positive");
    if (offset < 0.0) throw std::invalid_argument("tukey offset must be nonnegative");
    RobustKernel k;
    k.kind = Kind::shifted_tukey;
    k.width = width;
    k.offset = offset;
    return k;
  }
};

struct KernelValue {
  double weight = 1.0;         // in [0, 1]
  double weighted_error = 0.0; // weight * squared_error
};

/// Evaluates the kernel on a squared error (x = sqrt(squared_error)).
KernelValue apply_kernel(const RobustKernel& kernel, double squared_error);

}  // namespace vgicp
