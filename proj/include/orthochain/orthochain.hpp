#pragma once

#include "orthochain/errors.hpp"
#include "orthochain/numerics.hpp"
#include "orthochain/metrics.hpp"
#include "orthochain/chain.hpp"
#include "orthochain/theory.hpp"
#include "orthochain/init.hpp"
#include "orthochain/parallel.hpp"
#include "orthochain/experiments.hpp"
#include "orthochain/config.hpp"
