#pragma once

#include "gammaseg/errors.hpp"
#include "gammaseg/grid.hpp"
#include "gammaseg/potential.hpp"
#include "gammaseg/transport.hpp"
#include "gammaseg/energy.hpp"
#include "gammaseg/clp.hpp"
#include "gammaseg/cg.hpp"
#include "gammaseg/solver.hpp"
#include "gammaseg/gammalab.hpp"
#include "gammaseg/io.hpp"
