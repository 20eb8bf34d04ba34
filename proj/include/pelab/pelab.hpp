#pragma once

#include "pelab/core/errors.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/intensity.hpp"
#include "pelab/core/model.hpp"
#include "pelab/core/parallel.hpp"
#include "pelab/core/random.hpp"
#include "pelab/core/stats.hpp"
#include "pelab/core/validate.hpp"
#include "pelab/enlargement/compensator.hpp"
#include "pelab/enlargement/default_time.hpp"
#include "pelab/market/path_state.hpp"
#include "pelab/market/scenario.hpp"
#include "pelab/market/wealth.hpp"
#include "pelab/oracle/event_tree.hpp"
#include "pelab/oracle/representation.hpp"
#include "pelab/oracle/tree_bsde.hpp"
#include "pelab/oracle/tree_dp.hpp"
#include "pelab/bsde/generator.hpp"
#include "pelab/bsde/lsmc.hpp"
#include "pelab/bsde/ode.hpp"
#include "pelab/utility/indifference.hpp"
#include "pelab/utility/optimality.hpp"
#include "pelab/utility/strategy.hpp"
#include "pelab/cli/acceptance.hpp"
#include "pelab/cli/config.hpp"
#include "pelab/cli/experiments.hpp"
#include "pelab/cli/report.hpp"
