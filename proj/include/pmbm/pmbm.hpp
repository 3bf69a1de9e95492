#pragma once

// Umbrella header for the point/extended PMBM tracking library.

#include "pmbm/assignment.hpp"
#include "pmbm/clustering.hpp"
#include "pmbm/common.hpp"
#include "pmbm/estimation.hpp"
#include "pmbm/gating.hpp"
#include "pmbm/gaussian.hpp"
#include "pmbm/ggiw.hpp"
#include "pmbm/hybrid_state.hpp"
#include "pmbm/monte_carlo.hpp"
#include "pmbm/pmb.hpp"
#include "pmbm/pmbm_filter.hpp"
#include "pmbm/random.hpp"
#include "pmbm/scenario.hpp"
#include "pmbm/snapshot.hpp"
