#pragma once

// Everything except the HTTP review server, which needs cpp-httplib.

#include "mhht/assignment.hpp"
#include "mhht/association.hpp"
#include "mhht/benchmark.hpp"
#include "mhht/core.hpp"
#include "mhht/evaluation.hpp"
#include "mhht/geometry.hpp"
#include "mhht/history.hpp"
#include "mhht/interpolation.hpp"
#include "mhht/io.hpp"
#include "mhht/plot.hpp"
#include "mhht/posture.hpp"
#include "mhht/review.hpp"
#include "mhht/search.hpp"
#include "mhht/simulator.hpp"
