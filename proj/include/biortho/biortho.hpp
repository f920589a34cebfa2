#pragma once

#include "biortho/error.hpp"
#include "biortho/special.hpp"
#include "biortho/linalg.hpp"
#include "biortho/quadrature.hpp"
#include "biortho/core.hpp"
#include "biortho/multiple_poly.hpp"
#include "biortho/chgue.hpp"
#include "biortho/parallel.hpp"
#include "biortho/charpoly_avg.hpp"
