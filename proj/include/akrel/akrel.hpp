#pragma once

#include "akrel/bench.hpp"
#include "akrel/bernoulli.hpp"
#include "akrel/driver.hpp"
#include "akrel/enrich.hpp"
#include "akrel/estimator.hpp"
#include "akrel/io.hpp"
#include "akrel/kriging.hpp"
#include "akrel/learning.hpp"
#include "akrel/normal.hpp"
#include "akrel/rng.hpp"
#include "akrel/rv_model.hpp"
