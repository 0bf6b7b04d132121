#pragma once

namespace unlearn::special {

// I_x(a, b), the regularized incomplete beta function, for a, b > 0 and
// x in [0, 1]. Continued fraction (modified Lentz), absolute error well below
// 1e-12 for the parameter ranges used by the toolkit.
double regularized_incomplete_beta(double a, double b, double x);

// Student-t cumulative distribution with `df` degrees of freedom.
double student_t_cdf(double t, double df);

// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double df);

}  // namespace unlearn::special
