#pragma once

// Umbrella header: pulls in every module of the library.

#include "webrl/action.hpp"
#include "webrl/common.hpp"
#include "webrl/config.hpp"
#include "webrl/critic.hpp"
#include "webrl/curriculum.hpp"
#include "webrl/driver.hpp"
#include "webrl/env.hpp"
#include "webrl/features.hpp"
#include "webrl/learner.hpp"
#include "webrl/oracle.hpp"
#include "webrl/orm.hpp"
#include "webrl/policy.hpp"
#include "webrl/replay.hpp"
#include "webrl/rollout.hpp"
#include "webrl/site.hpp"
#include "webrl/tabular.hpp"
#include "webrl/tasks.hpp"
#include "webrl/trajectory.hpp"
