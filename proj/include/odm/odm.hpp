#pragma once

#include "odm/analysis.hpp"
#include "odm/boxqp.hpp"
#include "odm/data.hpp"
#include "odm/dual.hpp"
#include "odm/error.hpp"
#include "odm/kernel.hpp"
#include "odm/linear.hpp"
#include "odm/model_io.hpp"
