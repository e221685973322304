#pragma once

#include "emf/core.hpp"
#include "emf/rng.hpp"
#include "emf/parallel.hpp"
#include "emf/ensembles.hpp"
#include "emf/spectral.hpp"
#include "emf/dbm.hpp"
#include "emf/observables.hpp"
#include "emf/polynomial.hpp"
#include "emf/momentflow.hpp"
#include "emf/grassmann.hpp"
#include "emf/stats.hpp"
#include "emf/io.hpp"
#include "emf/config.hpp"
#include "emf/calibration.hpp"
