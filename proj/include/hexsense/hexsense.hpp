#pragma once

// Umbrella header: distributed estimation of a planar Gaussian field by a
// honeycomb sensor network, from local four-point inversion to consensus
// fusion.

#include "hexsense/common.hpp"
#include "hexsense/consensus.hpp"
#include "hexsense/estimator.hpp"
#include "hexsense/field.hpp"
#include "hexsense/harness.hpp"
#include "hexsense/io.hpp"
#include "hexsense/lattice.hpp"
#include "hexsense/rng.hpp"
#include "hexsense/sensitivity.hpp"
#include "hexsense/spacing.hpp"
