#pragma once

#include "otvq/expcli/config.hpp"
#include "otvq/expcli/metrics.hpp"
#include "otvq/expcli/ot_bench.hpp"
#include "otvq/expcli/runner.hpp"
#include "otvq/expcli/svg.hpp"
