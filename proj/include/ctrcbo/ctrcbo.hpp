#pragma once

#include "ctrcbo/random.hpp"
#include "ctrcbo/types.hpp"
#include "ctrcbo/gp_core.hpp"
#include "ctrcbo/trust_region.hpp"
#include "ctrcbo/primal_dual.hpp"
#include "ctrcbo/acquisition.hpp"
#include "ctrcbo/simulator.hpp"
#include "ctrcbo/optimizer.hpp"
#include "ctrcbo/config.hpp"
#include "ctrcbo/harness.hpp"
