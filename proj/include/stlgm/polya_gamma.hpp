#pragma once

#include "stlgm/rng.hpp"

namespace stlgm {

/// Exact draw from PG(1, c) by Devroye's alternating-series rejection
/// sampler with truncation point 0.64. Even in c.
double sample_polya_gamma(double c, Rng& rng);

/// E[PG(1, c)] = tanh(c/2) / (2c), with the limit 1/4 at c = 0.
double polya_gamma_mean(double c);

/// Var[PG(1, c)] = (sinh c - c) / (4 c^3 cosh^2(c/2)), limit 1/24 at c = 0.
double polya_gamma_variance(double c);

}  // namespace stlgm
