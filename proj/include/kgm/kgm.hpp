/**
 * @file kgm.hpp
 * @brief Umbrella header for the solver library.
 */
#pragma once

#include "kgm/analysis.hpp"
#include "kgm/energy.hpp"
#include "kgm/errors.hpp"
#include "kgm/experiment.hpp"
#include "kgm/grid.hpp"
#include "kgm/ground_state.hpp"
#include "kgm/minimizer.hpp"
#include "kgm/psi_map.hpp"
#include "kgm/snapshot.hpp"
