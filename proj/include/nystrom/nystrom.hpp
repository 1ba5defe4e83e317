#pragma once

#include "nystrom/core/errors.hpp"
#include "nystrom/core/parallel.hpp"
#include "nystrom/core/types.hpp"
#include "nystrom/geometry.hpp"
#include "nystrom/harness/config.hpp"
#include "nystrom/harness/experiments.hpp"
#include "nystrom/harness/report.hpp"
#include "nystrom/kernels.hpp"
#include "nystrom/oracle.hpp"
#include "nystrom/quadrature.hpp"
#include "nystrom/solver.hpp"
#include "nystrom/trig.hpp"
