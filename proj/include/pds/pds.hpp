#pragma once

#include "pds/dgp.hpp"
#include "pds/estimators.hpp"
#include "pds/hte.hpp"
#include "pds/io.hpp"
#include "pds/lasso.hpp"
#include "pds/metrics.hpp"
#include "pds/montecarlo.hpp"
#include "pds/normal.hpp"
#include "pds/ols.hpp"
#include "pds/rng.hpp"
#include "pds/split_sample.hpp"
#include "pds/types.hpp"
