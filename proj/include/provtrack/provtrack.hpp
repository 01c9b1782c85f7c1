#pragma once

// Everything in one include.

#include "provtrack/error.hpp"
#include "provtrack/value.hpp"
#include "provtrack/dataset.hpp"
#include "provtrack/csv.hpp"
#include "provtrack/expr.hpp"
#include "provtrack/operators.hpp"
#include "provtrack/prov_model.hpp"
#include "provtrack/tracker.hpp"
#include "provtrack/log.hpp"
#include "provtrack/graph.hpp"
#include "provtrack/prov_json.hpp"
#include "provtrack/query.hpp"
#include "provtrack/pipeline.hpp"
#include "provtrack/synth.hpp"
#include "provtrack/bench.hpp"
