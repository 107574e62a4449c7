#pragma once

// Everything in one include.
#include "mhc/chain.hpp"
#include "mhc/classifier.hpp"
#include "mhc/config.hpp"
#include "mhc/diagnostics.hpp"
#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/forest.hpp"
#include "mhc/io.hpp"
#include "mhc/likelihood.hpp"
#include "mhc/logistic.hpp"
#include "mhc/models.hpp"
#include "mhc/neural_net.hpp"
#include "mhc/priors.hpp"
#include "mhc/rand.hpp"
#include "mhc/runner.hpp"
#include "mhc/samplers.hpp"
#include "mhc/special.hpp"
#include "mhc/theory.hpp"
#include "mhc/types.hpp"
