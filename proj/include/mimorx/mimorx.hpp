#pragma once

#include "rng.hpp"
#include "numerics.hpp"
#include "config.hpp"
#include "modem.hpp"
#include "pa.hpp"
#include "channel.hpp"
#include "linear_rx.hpp"
#include "dataset.hpp"
#include "mld.hpp"
#include "neural.hpp"
#include "receivers.hpp"
#include "harness.hpp"
