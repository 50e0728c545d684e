#pragma once

#include "otvq/models/checkpoint.hpp"
#include "otvq/models/losses.hpp"
#include "otvq/models/network.hpp"
#include "otvq/models/train.hpp"
