#pragma once

#include "otvq/ot/discrete.hpp"
#include "otvq/ot/exact.hpp"
#include "otvq/ot/joint.hpp"
#include "otvq/ot/semi_dual.hpp"
#include "otvq/ot/sinkhorn.hpp"
