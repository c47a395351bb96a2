#pragma once

#include "quanto/black_scholes.hpp"
#include "quanto/errors.hpp"
#include "quanto/experiments.hpp"
#include "quanto/expert_matrix.hpp"
#include "quanto/heston_sim.hpp"
#include "quanto/kernel_copula.hpp"
#include "quanto/key_value.hpp"
#include "quanto/marginals.hpp"
#include "quanto/market_model.hpp"
#include "quanto/normal.hpp"
#include "quanto/parallel.hpp"
#include "quanto/pricing.hpp"
#include "quanto/rng.hpp"
#include "quanto/stats.hpp"
#include "quanto/version.hpp"
