#pragma once

#include "tmsq/analysis.hpp"
#include "tmsq/config.hpp"
#include "tmsq/dsp.hpp"
#include "tmsq/fft.hpp"
#include "tmsq/model.hpp"
#include "tmsq/parallel.hpp"
#include "tmsq/rng.hpp"
#include "tmsq/store.hpp"
#include "tmsq/synth.hpp"
#include "tmsq/trace.hpp"
#include "tmsq/util.hpp"
