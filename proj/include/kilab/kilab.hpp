#pragma once

#include "kilab/errors.hpp"
#include "kilab/geometry_rng.hpp"
#include "kilab/zonal.hpp"
#include "kilab/kernel_spectrum.hpp"
#include "kilab/rate_theory.hpp"
#include "kilab/target_model.hpp"
#include "kilab/estimator.hpp"
#include "kilab/oracles.hpp"
#include "kilab/harness/csv.hpp"
#include "kilab/harness/config.hpp"
#include "kilab/harness/sweep.hpp"
#include "kilab/harness/analyze.hpp"
#include "kilab/harness/phase_grid.hpp"
#include "kilab/harness/verify.hpp"
