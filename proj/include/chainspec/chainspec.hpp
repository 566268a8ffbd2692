#pragma once

#include "chainspec/problem.hpp"
#include "chainspec/pencil.hpp"
#include "chainspec/chain_transform.hpp"
#include "chainspec/fem.hpp"
#include "chainspec/sigma.hpp"
#include "chainspec/shooting.hpp"
#include "chainspec/oscillation.hpp"
#include "chainspec/k_operator.hpp"
#include "chainspec/pipeline.hpp"
