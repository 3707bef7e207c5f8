#pragma once

#include "bandit.hpp"
#include "eda.hpp"
#include "errors.hpp"
#include "formula.hpp"
#include "formula_enum.hpp"
#include "formula_partition.hpp"
#include "formula_search.hpp"
#include "harness.hpp"
#include "parallel.hpp"
#include "policies.hpp"
#include "policy_spec.hpp"
#include "power.hpp"
#include "random.hpp"
