#pragma once

#include <imbfc/backtest.hpp>
#include <imbfc/binning.hpp>
#include <imbfc/config.hpp>
#include <imbfc/distribution.hpp>
#include <imbfc/error.hpp>
#include <imbfc/features.hpp>
#include <imbfc/gp.hpp>
#include <imbfc/market_data.hpp>
#include <imbfc/metrics.hpp>
#include <imbfc/mlp.hpp>
#include <imbfc/quarter.hpp>
#include <imbfc/report.hpp>
#include <imbfc/schedule.hpp>
#include <imbfc/simgen.hpp>
#include <imbfc/transition.hpp>
#include <imbfc/tspa.hpp>
