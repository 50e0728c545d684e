#pragma once

#include "otvq/vq/codebook.hpp"
#include "otvq/vq/metrics.hpp"
#include "otvq/vq/quantize.hpp"
