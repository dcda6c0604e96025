#pragma once

#include "sensched/analysis.hpp"
#include "sensched/channel.hpp"
#include "sensched/dqn.hpp"
#include "sensched/environment.hpp"
#include "sensched/errors.hpp"
#include "sensched/estimation.hpp"
#include "sensched/harness.hpp"
#include "sensched/neural.hpp"
#include "sensched/policies.hpp"
#include "sensched/rng.hpp"
#include "sensched/scenario.hpp"
#include "sensched/stability.hpp"
