#pragma once

#include "comds/types.hpp"
#include "comds/validate.hpp"
#include "comds/distances.hpp"
#include "comds/baselines.hpp"
#include "comds/solver.hpp"
#include "comds/decomposition.hpp"
#include "comds/diagnostics.hpp"
#include "comds/parallel.hpp"
#include "comds/simgen.hpp"
#include "comds/simulate.hpp"
#include "comds/io.hpp"
