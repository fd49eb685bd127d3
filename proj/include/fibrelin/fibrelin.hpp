#pragma once

// Umbrella header: expression core, system DSL, Lie calculus, normal form,
// connection, zero dynamics, simulation, verification suites and reports.

#include "fibrelin/connection.hpp"
#include "fibrelin/errors.hpp"
#include "fibrelin/expr.hpp"
#include "fibrelin/lie.hpp"
#include "fibrelin/linalg.hpp"
#include "fibrelin/normal_form.hpp"
#include "fibrelin/parser.hpp"
#include "fibrelin/report.hpp"
#include "fibrelin/rng.hpp"
#include "fibrelin/sim.hpp"
#include "fibrelin/system.hpp"
#include "fibrelin/verify.hpp"
#include "fibrelin/zerodyn.hpp"
