#pragma once

namespace dimcmc {

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x),
// a > 0, x >= 0.  Series expansion for x < a+1, Lentz continued fraction
// otherwise; relative accuracy around 1e-14.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Survival function of the chi-square distribution with dof degrees of
// freedom, Q(dof/2, x/2).
double chi_square_sf(double x, double dof);

}  // namespace dimcmc
