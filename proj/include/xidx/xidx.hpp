#pragma once

#include "xidx/error.hpp"
#include "xidx/xml.hpp"
#include "xidx/path_query.hpp"
#include "xidx/summary.hpp"
#include "xidx/structural_join.hpp"
#include "xidx/twig.hpp"
#include "xidx/decimal.hpp"
#include "xidx/warehouse.hpp"
#include "xidx/generate.hpp"
#include "xidx/bench.hpp"
