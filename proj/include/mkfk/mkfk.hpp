#pragma once

// Umbrella header.

#include "mkfk/checks.hpp"
#include "mkfk/cli.hpp"
#include "mkfk/config.hpp"
#include "mkfk/core.hpp"
#include "mkfk/errors.hpp"
#include "mkfk/field.hpp"
#include "mkfk/fk_solver.hpp"
#include "mkfk/initial_density.hpp"
#include "mkfk/io.hpp"
#include "mkfk/metrics.hpp"
#include "mkfk/noise.hpp"
#include "mkfk/parallel.hpp"
#include "mkfk/particle_sim.hpp"
#include "mkfk/pde_oracle.hpp"
#include "mkfk/studies.hpp"
#include "mkfk/time_grid.hpp"
#include "mkfk/trajectory.hpp"
