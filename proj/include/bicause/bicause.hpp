#pragma once

#include "bicause/dataset.hpp"
#include "bicause/errors.hpp"
#include "bicause/estimators.hpp"
#include "bicause/eval.hpp"
#include "bicause/logistic.hpp"
#include "bicause/positivity.hpp"
#include "bicause/rng.hpp"
#include "bicause/special_functions.hpp"
#include "bicause/stats.hpp"
#include "bicause/synthgen.hpp"
#include "bicause/tree.hpp"
#include "bicause/tree_io.hpp"
