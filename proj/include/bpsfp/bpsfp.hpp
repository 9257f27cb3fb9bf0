#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/simplex.hpp"
#include "bpsfp/objectives.hpp"
#include "bpsfp/linops.hpp"
#include "bpsfp/projections.hpp"
#include "bpsfp/linesearch.hpp"
#include "bpsfp/solver.hpp"
#include "bpsfp/comparator.hpp"
#include "bpsfp/experiments.hpp"
#include "bpsfp/tomography.hpp"
