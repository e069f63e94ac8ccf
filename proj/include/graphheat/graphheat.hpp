#ifndef GRAPHHEAT_GRAPHHEAT_HPP
#define GRAPHHEAT_GRAPHHEAT_HPP

#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"
#include "graphheat/metric.hpp"
#include "graphheat/calculus.hpp"
#include "graphheat/density.hpp"
#include "graphheat/test_functions.hpp"
#include "graphheat/linalg.hpp"
#include "graphheat/solver.hpp"
#include "graphheat/certify.hpp"

#endif
