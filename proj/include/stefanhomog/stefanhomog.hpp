#pragma once

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/cell_problem.hpp"
#include "stefanhomog/common.hpp"
#include "stefanhomog/config.hpp"
#include "stefanhomog/convex.hpp"
#include "stefanhomog/diagnostics.hpp"
#include "stefanhomog/elliptic.hpp"
#include "stefanhomog/grid.hpp"
#include "stefanhomog/hypotheses.hpp"
#include "stefanhomog/oscillatory.hpp"
#include "stefanhomog/stefan_solver.hpp"
