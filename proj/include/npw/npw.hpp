#pragma once

#include "npw/core.hpp"
#include "npw/quadrature.hpp"
#include "npw/field.hpp"
#include "npw/manifold.hpp"
#include "npw/deltanets.hpp"
#include "npw/profiles.hpp"
#include "npw/trajectory.hpp"
#include "npw/ode.hpp"
#include "npw/solver.hpp"
#include "npw/picard.hpp"
#include "npw/oracles.hpp"
#include "npw/config.hpp"
#include "npw/experiments.hpp"
#include "npw/io.hpp"
