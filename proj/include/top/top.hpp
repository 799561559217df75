#pragma once

// Umbrella header.

#include "top/error.hpp"
#include "top/stats.hpp"
#include "top/trial_state.hpp"
#include "top/design.hpp"
#include "top/decision_table.hpp"
#include "top/baselines.hpp"
#include "top/simulation.hpp"
#include "top/io.hpp"
#include "top/report.hpp"
#include "top/service.hpp"
