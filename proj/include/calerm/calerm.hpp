#ifndef CALERM_CALERM_HPP
#define CALERM_CALERM_HPP

#include "calerm/complexity.hpp"
#include "calerm/config.hpp"
#include "calerm/csv.hpp"
#include "calerm/decomposition.hpp"
#include "calerm/erm.hpp"
#include "calerm/error.hpp"
#include "calerm/experiments.hpp"
#include "calerm/geometry.hpp"
#include "calerm/losses.hpp"
#include "calerm/parallel.hpp"
#include "calerm/report.hpp"
#include "calerm/smallball.hpp"
#include "calerm/svg.hpp"
#include "calerm/synthdata.hpp"

#endif  // CALERM_CALERM_HPP
