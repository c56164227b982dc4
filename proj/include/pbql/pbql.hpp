#pragma once

// Umbrella header: the whole library except the CLI front end
// (include pbql/cli.hpp separately to get cli_main and its CLI11 dependency).

#include "pbql/env.hpp"
#include "pbql/errors.hpp"
#include "pbql/experiment.hpp"
#include "pbql/io.hpp"
#include "pbql/oracles.hpp"
#include "pbql/partial_bound.hpp"
#include "pbql/planner.hpp"
#include "pbql/qlearning.hpp"
#include "pbql/rng.hpp"
#include "pbql/table.hpp"
#include "pbql/trajectory.hpp"
