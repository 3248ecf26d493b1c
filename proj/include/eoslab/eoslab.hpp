#pragma once

// Numerical laboratory for edge-of-stability dynamics under SGD: landscapes
// with controlled curvature and noise, constrained reference trajectories,
// reduced and vector-valued predicted dynamics, and the measurement probes
// that tie them together.

#include "eoslab/vec.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/lanczos.hpp"
#include "eoslab/landscape.hpp"
#include "eoslab/canonical.hpp"
#include "eoslab/mlp.hpp"
#include "eoslab/report.hpp"
#include "eoslab/probe.hpp"
#include "eoslab/stats.hpp"
#include "eoslab/refpath.hpp"
#include "eoslab/predicted.hpp"
#include "eoslab/coupling.hpp"
#include "eoslab/csv.hpp"
#include "eoslab/config.hpp"
#include "eoslab/presets.hpp"
