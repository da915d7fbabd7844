#pragma once

#include "mixshift/core.hpp"
#include "mixshift/dataset.hpp"
#include "mixshift/density.hpp"
#include "mixshift/estimators.hpp"
#include "mixshift/hull.hpp"
#include "mixshift/inference.hpp"
#include "mixshift/learners.hpp"
#include "mixshift/policy.hpp"
#include "mixshift/serialize.hpp"
#include "mixshift/simulate.hpp"
#include "mixshift/commands.hpp"
