#pragma once

// Umbrella header: site-effect estimation for multisite trials.

#include "multisite/config.hpp"
#include "multisite/csv.hpp"
#include "multisite/datagen.hpp"
#include "multisite/dp_calibration.hpp"
#include "multisite/dp_model.hpp"
#include "multisite/draws.hpp"
#include "multisite/errors.hpp"
#include "multisite/gaussian_model.hpp"
#include "multisite/harness.hpp"
#include "multisite/losses.hpp"
#include "multisite/metamodel.hpp"
#include "multisite/results_analysis.hpp"
#include "multisite/rng.hpp"
#include "multisite/site_data.hpp"
#include "multisite/summaries.hpp"
