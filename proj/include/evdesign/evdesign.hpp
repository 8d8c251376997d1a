#pragma once

#include "evdesign/design_studio.hpp"
#include "evdesign/error.hpp"
#include "evdesign/event_dynamics.hpp"
#include "evdesign/numerics.hpp"
#include "evdesign/power_engine.hpp"
#include "evdesign/random.hpp"
#include "evdesign/stochastic_models.hpp"
#include "evdesign/trial_data.hpp"
#include "evdesign/trial_design.hpp"
#include "evdesign/trial_simulator.hpp"
