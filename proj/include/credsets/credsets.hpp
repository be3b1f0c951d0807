#pragma once

#include "credsets/random.hpp"
#include "credsets/sequence_model.hpp"
#include "credsets/conjugate_posterior.hpp"
#include "credsets/norms.hpp"
#include "credsets/credible_sets.hpp"
#include "credsets/signal_classes.hpp"
#include "credsets/serialization.hpp"
#include "credsets/experiments/config.hpp"
#include "credsets/experiments/runners.hpp"
#include "credsets/experiments/output.hpp"
