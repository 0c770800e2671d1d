#pragma once

// Single include for the whole library: lattice model, spectral tools,
// time-domain engine, run configuration, and tabular output.

#include "config.hpp"
#include "dynamics.hpp"
#include "model.hpp"
#include "runner.hpp"
#include "spectral.hpp"
#include "table.hpp"
