#pragma once

// Umbrella header for the elldet identity-verification library.

#include "elldet/builders.hpp"
#include "elldet/harness.hpp"
#include "elldet/identities.hpp"
#include "elldet/linalg.hpp"
#include "elldet/matrix.hpp"
#include "elldet/monomial.hpp"
#include "elldet/numeric.hpp"
#include "elldet/report.hpp"
#include "elldet/rng.hpp"
#include "elldet/sampling.hpp"
#include "elldet/theta.hpp"
#include "elldet/tracked_value.hpp"
