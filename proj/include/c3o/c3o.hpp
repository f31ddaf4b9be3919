#pragma once

#include "c3o/configurator.hpp"
#include "c3o/dataset.hpp"
#include "c3o/error.hpp"
#include "c3o/evalharness.hpp"
#include "c3o/feature_matrix.hpp"
#include "c3o/gbm.hpp"
#include "c3o/linear.hpp"
#include "c3o/models.hpp"
#include "c3o/nnls.hpp"
#include "c3o/selection.hpp"
#include "c3o/synth.hpp"
#include "c3o/validation.hpp"
