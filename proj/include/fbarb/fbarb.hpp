#pragma once

#include "fbarb/asymptotics.hpp"
#include "fbarb/coefficients.hpp"
#include "fbarb/errors.hpp"
#include "fbarb/hurst.hpp"
#include "fbarb/market.hpp"
#include "fbarb/parallel.hpp"
#include "fbarb/quadrature.hpp"
#include "fbarb/report.hpp"
#include "fbarb/rng.hpp"
#include "fbarb/verify.hpp"
