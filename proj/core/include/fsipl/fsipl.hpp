#pragma once

// Umbrella header for the feasibility-safeguarded inexact proximal linearized
// solver library.

#include "fsipl/composite.hpp"
#include "fsipl/dual_subproblem.hpp"
#include "fsipl/errors.hpp"
#include "fsipl/harness.hpp"
#include "fsipl/manifold.hpp"
#include "fsipl/oracles.hpp"
#include "fsipl/rng.hpp"
#include "fsipl/solver.hpp"
