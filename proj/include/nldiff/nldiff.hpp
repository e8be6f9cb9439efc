#pragma once

#include "nldiff/error.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"
#include "nldiff/domain.hpp"
#include "nldiff/fft.hpp"
#include "nldiff/convolution.hpp"
#include "nldiff/evolution.hpp"
#include "nldiff/fundamental.hpp"
#include "nldiff/barriers.hpp"
#include "nldiff/stationary.hpp"
#include "nldiff/diagnostics.hpp"
#include "nldiff/config.hpp"
#include "nldiff/snapshot.hpp"
#include "nldiff/experiment.hpp"
