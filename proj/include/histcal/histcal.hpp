#pragma once

#include "histcal/assessment.hpp"
#include "histcal/calibrators.hpp"
#include "histcal/data.hpp"
#include "histcal/errors.hpp"
#include "histcal/experiments.hpp"
#include "histcal/guarantees.hpp"
#include "histcal/model.hpp"
#include "histcal/report.hpp"
#include "histcal/rng.hpp"
#include "histcal/scalers.hpp"
#include "histcal/stats.hpp"
