#pragma once

#include "holo/autofocus.hpp"
#include "holo/container.hpp"
#include "holo/core.hpp"
#include "holo/dataset.hpp"
#include "holo/error.hpp"
#include "holo/fft.hpp"
#include "holo/metrics.hpp"
#include "holo/parallel.hpp"
#include "holo/phase_retrieval.hpp"
#include "holo/propagation.hpp"
#include "holo/rng.hpp"
#include "holo/simulator.hpp"
