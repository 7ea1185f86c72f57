#pragma once

#include <cstdint>

namespace usbcf {

/// Regularized incomplete beta function I_x(a, b), continued-fraction form.
double incomplete_beta(double a, double b, double x);

/// P[X >= k] for X ~ Binomial(n, p).
double binomial_upper_tail(std::int64_t n, std::int64_t k, double p);

/// Two-sided p-value of a Student t statistic with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

}  // namespace usbcf
