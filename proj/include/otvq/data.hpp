#pragma once

#include "otvq/data/batches.hpp"
#include "otvq/data/dataset.hpp"
#include "otvq/data/idx.hpp"
#include "otvq/data/synthetic.hpp"
