#pragma once

// Umbrella header for the facial-expressiveness analytics library.

#include "qfe/causality.hpp"
#include "qfe/error.hpp"
#include "qfe/expressiveness.hpp"
#include "qfe/factor.hpp"
#include "qfe/feature.hpp"
#include "qfe/feature_csv.hpp"
#include "qfe/matrix.hpp"
#include "qfe/preprocess.hpp"
#include "qfe/robustness.hpp"
#include "qfe/rng.hpp"
#include "qfe/stats.hpp"
#include "qfe/subjectivity.hpp"
#include "qfe/svg.hpp"
