#pragma once

#include "maxdiff/error.hpp"
#include "maxdiff/linalg.hpp"
#include "maxdiff/rng.hpp"
#include "maxdiff/parallel.hpp"
#include "maxdiff/cov_spec.hpp"
#include "maxdiff/gaussian_core.hpp"
#include "maxdiff/sampler.hpp"
#include "maxdiff/levy.hpp"
#include "maxdiff/bounds.hpp"
#include "maxdiff/bootstrap.hpp"
#include "maxdiff/designs.hpp"
#include "maxdiff/experiments.hpp"
