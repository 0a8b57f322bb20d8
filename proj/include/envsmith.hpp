#pragma once

#include "envsmith/value.hpp"
#include "envsmith/decimal.hpp"
#include "envsmith/errors.hpp"
#include "envsmith/digest.hpp"
#include "envsmith/schema.hpp"
#include "envsmith/statedoc.hpp"
#include "envsmith/expr.hpp"
#include "envsmith/tool.hpp"
#include "envsmith/exec.hpp"
#include "envsmith/envdir.hpp"
#include "envsmith/client.hpp"
#include "envsmith/rulegen.hpp"
#include "envsmith/toolgraph.hpp"
#include "envsmith/walk.hpp"
#include "envsmith/taskgraph.hpp"
#include "envsmith/taskgen.hpp"
#include "envsmith/rollout.hpp"
#include "envsmith/erpo.hpp"
#include "envsmith/jsonl.hpp"
#include "envsmith/config.hpp"
#include "envsmith/fixtures.hpp"
#include "envsmith/pipeline.hpp"
