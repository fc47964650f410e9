#pragma once

#include "roct/adversary.hpp"
#include "roct/common.hpp"
#include "roct/dataset.hpp"
#include "roct/exact.hpp"
#include "roct/experiment.hpp"
#include "roct/greedy.hpp"
#include "roct/margin.hpp"
#include "roct/matching_bound.hpp"
#include "roct/maxsat.hpp"
#include "roct/milp.hpp"
#include "roct/solver_bridge.hpp"
#include "roct/thresholds.hpp"
#include "roct/tree.hpp"
#include "roct/wcnf_solver.hpp"
