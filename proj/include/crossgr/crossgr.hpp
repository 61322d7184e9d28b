#pragma once

// Master header for the crossgr toolkit: a cross-market recommender built on
// a Graph Isomorphism Network over the merged user-item interaction graph,
// classic and neural baselines, and the HR@K / NDCG@K evaluation harness.

#include "crossgr/baselines.hpp"
#include "crossgr/checkpoint.hpp"
#include "crossgr/cli.hpp"
#include "crossgr/evaluation.hpp"
#include "crossgr/graph.hpp"
#include "crossgr/hash.hpp"
#include "crossgr/interactions.hpp"
#include "crossgr/matrix.hpp"
#include "crossgr/model.hpp"
#include "crossgr/rng.hpp"
#include "crossgr/synthetic.hpp"
#include "crossgr/tape.hpp"
#include "crossgr/training.hpp"
