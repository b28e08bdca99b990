// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/data/csv.hpp"
#include "bridgekit/data/empirical.hpp"
#include "bridgekit/data/gmm.hpp"
#include "bridgekit/data/manifold.hpp"
#include "bridgekit/drift/adam.hpp"
#include "bridgekit/drift/checkpoint.hpp"
#include "bridgekit/drift/network.hpp"
#include "bridgekit/ipf/bridge.hpp"
#include "bridgekit/loss/score_loss.hpp"
#include "bridgekit/loss/trace.hpp"
#include "bridgekit/ot/wasserstein.hpp"
#include "bridgekit/sde/buffer.hpp"
#include "bridgekit/sde/simulate.hpp"
#include "bridgekit/sde/trajectory_io.hpp"
