#pragma once

#include "mapomdp/errors.hpp"
#include "mapomdp/pomdp.hpp"
#include "mapomdp/cassandra.hpp"
#include "mapomdp/model_io.hpp"
#include "mapomdp/models.hpp"
#include "mapomdp/simulate.hpp"
#include "mapomdp/linalg.hpp"
#include "mapomdp/automaton.hpp"
#include "mapomdp/decomposition.hpp"
#include "mapomdp/value_iteration.hpp"
#include "mapomdp/modified_mdp.hpp"
#include "mapomdp/baseline_grid.hpp"
#include "mapomdp/oracle.hpp"
