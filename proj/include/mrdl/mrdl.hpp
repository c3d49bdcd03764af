#pragma once

#include "mrdl/cbf.hpp"
#include "mrdl/constraint.hpp"
#include "mrdl/core.hpp"
#include "mrdl/deadlock.hpp"
#include "mrdl/errors.hpp"
#include "mrdl/graphenum.hpp"
#include "mrdl/io.hpp"
#include "mrdl/qp.hpp"
#include "mrdl/resolution.hpp"
#include "mrdl/scenarios.hpp"
#include "mrdl/sim.hpp"
