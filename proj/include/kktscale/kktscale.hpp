#pragma once

#include "kktscale/sparse_matrix.hpp"
#include "kktscale/matrix_market.hpp"
#include "kktscale/scaling.hpp"
#include "kktscale/ordering.hpp"
#include "kktscale/ldlt.hpp"
#include "kktscale/controller.hpp"
#include "kktscale/solver.hpp"
#include "kktscale/kkt.hpp"
#include "kktscale/ipm.hpp"
#include "kktscale/problems.hpp"
#include "kktscale/bench.hpp"
