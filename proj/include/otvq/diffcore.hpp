#pragma once

#include "otvq/diffcore/adam.hpp"
#include "otvq/diffcore/backward.hpp"
#include "otvq/diffcore/grad_check.hpp"
#include "otvq/diffcore/ops.hpp"
#include "otvq/diffcore/tensor.hpp"
