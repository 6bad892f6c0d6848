#pragma once

#include "stgraph/autodiff.hpp"
#include "stgraph/checkpoint.hpp"
#include "stgraph/eval.hpp"
#include "stgraph/features.hpp"
#include "stgraph/geo_hex.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/graph_io.hpp"
#include "stgraph/models.hpp"
#include "stgraph/pipeline.hpp"
#include "stgraph/records.hpp"
#include "stgraph/reports.hpp"
#include "stgraph/synth.hpp"
#include "stgraph/training.hpp"
