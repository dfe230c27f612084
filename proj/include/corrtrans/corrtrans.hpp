// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "corrtrans/specfun.hpp"
#include "corrtrans/ode.hpp"
#include "corrtrans/edgeworth.hpp"
#include "corrtrans/pearson.hpp"
#include "corrtrans/rng.hpp"
#include "corrtrans/models.hpp"
#include "corrtrans/montecarlo.hpp"
#include "corrtrans/table_io.hpp"
