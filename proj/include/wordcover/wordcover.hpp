#pragma once

// Umbrella header.

#include "wordcover/config.hpp"
#include "wordcover/cover.hpp"
#include "wordcover/errors.hpp"
#include "wordcover/io.hpp"
#include "wordcover/nn_index.hpp"
#include "wordcover/parallel.hpp"
#include "wordcover/persistence.hpp"
#include "wordcover/pipeline.hpp"
#include "wordcover/rng.hpp"
#include "wordcover/space.hpp"
#include "wordcover/spectral.hpp"
#include "wordcover/transport.hpp"
