#pragma once

// Umbrella header.

#include "gpsh/version.hpp"
#include "gpsh/errors.hpp"
#include "gpsh/rng.hpp"
#include "gpsh/forms.hpp"
#include "gpsh/grassmann.hpp"
#include "gpsh/domain.hpp"
#include "gpsh/charts.hpp"
#include "gpsh/lattice.hpp"
#include "gpsh/io.hpp"
