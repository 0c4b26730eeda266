#pragma once

namespace dffw {

/// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0,1].
/// Continued-fraction evaluation, relative accuracy ~1e-12.
double ibeta_reg(double a, double b, double x);

}  // namespace dffw
