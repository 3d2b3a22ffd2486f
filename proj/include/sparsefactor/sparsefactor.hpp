#pragma once

// Umbrella header.
#include "sparsefactor/errors.hpp"
#include "sparsefactor/series.hpp"
#include "sparsefactor/spectral.hpp"
#include "sparsefactor/varimax.hpp"
#include "sparsefactor/penalty.hpp"
#include "sparsefactor/admm.hpp"
#include "sparsefactor/metrics.hpp"
#include "sparsefactor/model_selection.hpp"
#include "sparsefactor/simulation.hpp"
