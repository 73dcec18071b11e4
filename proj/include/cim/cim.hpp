#pragma once

#include "cim/comparison.hpp"
#include "cim/config.hpp"
#include "cim/density_oracle.hpp"
#include "cim/error.hpp"
#include "cim/experiments.hpp"
#include "cim/format.hpp"
#include "cim/io.hpp"
#include "cim/model.hpp"
#include "cim/parallel.hpp"
#include "cim/problems.hpp"
#include "cim/rng.hpp"
#include "cim/sde_conditional.hpp"
#include "cim/sde_total.hpp"
