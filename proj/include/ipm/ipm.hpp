#pragma once

#include "ipm/core.hpp"
#include "ipm/random.hpp"
#include "ipm/kernels.hpp"
#include "ipm/distribution.hpp"
#include "ipm/discriminator.hpp"
#include "ipm/dynamics.hpp"
#include "ipm/transport.hpp"
#include "ipm/metrics.hpp"
#include "ipm/stability.hpp"
#include "ipm/divergence.hpp"
#include "ipm/experiments.hpp"
#include "ipm/io.hpp"
#include "ipm/svg.hpp"
