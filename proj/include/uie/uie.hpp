#pragma once

#include "uie/channel.hpp"
#include "uie/core.hpp"
#include "uie/engine.hpp"
#include "uie/experiments.hpp"
#include "uie/node.hpp"
#include "uie/oracles.hpp"
#include "uie/random.hpp"
#include "uie/trace_io.hpp"
