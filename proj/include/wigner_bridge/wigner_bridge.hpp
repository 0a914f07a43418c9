#pragma once

// Umbrella header: the whole library is header-only.

#include "rng.hpp"
#include "semicircle.hpp"
#include "ensembles.hpp"
#include "spectral.hpp"
#include "resolvent.hpp"
#include "swap.hpp"
#include "bridgestats.hpp"
#include "harness/config.hpp"
#include "harness/parallel.hpp"
#include "harness/persist.hpp"
#include "harness/run.hpp"
