#pragma once

#include "mimoplace/errors.hpp"
#include "mimoplace/scenario.hpp"
#include "mimoplace/scenario_io.hpp"
#include "mimoplace/signal_model.hpp"
#include "mimoplace/fim_crlb.hpp"
#include "mimoplace/sdp_solver.hpp"
#include "mimoplace/local_optimizer.hpp"
#include "mimoplace/single_target_sdp.hpp"
#include "mimoplace/multi_target.hpp"
#include "mimoplace/mc_sim.hpp"
#include "mimoplace/reports.hpp"
