#pragma once

#include "relperf/convergence.hpp"
#include "relperf/core.hpp"
#include "relperf/equilibrium.hpp"
#include "relperf/io.hpp"
#include "relperf/parallel.hpp"
#include "relperf/rng.hpp"
#include "relperf/runner.hpp"
#include "relperf/simulation.hpp"
#include "relperf/sweep.hpp"
