//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "otfwi/core.hpp"
#include "otfwi/error.hpp"
#include "otfwi/inversion.hpp"
#include "otfwi/io.hpp"
#include "otfwi/lbfgs.hpp"
#include "otfwi/log.hpp"
#include "otfwi/misfit.hpp"
#include "otfwi/normalization.hpp"
#include "otfwi/parallel.hpp"
#include "otfwi/recipes.hpp"
#include "otfwi/sensitivity.hpp"
#include "otfwi/transport.hpp"
#include "otfwi/wave_solver.hpp"
#include "otfwi/wavelet.hpp"
