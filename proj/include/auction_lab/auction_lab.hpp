#pragma once

// Umbrella header for the library proper. The scenario, report, experiment and
// CLI layers pull in the vendored JSON/CLI headers and are included separately.

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/mechanism.hpp"
#include "auction_lab/mixture.hpp"
#include "auction_lab/planner.hpp"
#include "auction_lab/quadrature.hpp"
#include "auction_lab/revenue.hpp"
#include "auction_lab/rng.hpp"
