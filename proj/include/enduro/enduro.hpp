#pragma once

// Umbrella header for the whole library.

#include "enduro/bioenergetics.hpp"
#include "enduro/errors.hpp"
#include "enduro/experiment.hpp"
#include "enduro/glyc.hpp"
#include "enduro/nutrition.hpp"
#include "enduro/params.hpp"
#include "enduro/pmp.hpp"
#include "enduro/shooting.hpp"
#include "enduro/solver.hpp"
#include "enduro/transcription.hpp"
