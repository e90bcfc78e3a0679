#pragma once

#include "demi/bounds.hpp"
#include "demi/dirichlet_solver.hpp"
#include "demi/discretization.hpp"
#include "demi/domain_grid.hpp"
#include "demi/eigen.hpp"
#include "demi/errors.hpp"
#include "demi/operator_core.hpp"
#include "demi/verify.hpp"
