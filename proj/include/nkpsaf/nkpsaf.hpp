#pragma once

#include "errors.hpp"
#include "signal.hpp"
#include "noise.hpp"
#include "filterbank.hpp"
#include "nkp.hpp"
#include "adapt.hpp"
#include "metrics.hpp"
#include "identify.hpp"
#include "anc.hpp"
#include "config.hpp"
#include "experiment.hpp"
