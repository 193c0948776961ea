#pragma once

#include "monofix/adversary.hpp"
#include "monofix/distribution.hpp"
#include "monofix/grid_table.hpp"
#include "monofix/kmarginal.hpp"
#include "monofix/marginal.hpp"
#include "monofix/monotone1d.hpp"
#include "monofix/monotone_nd.hpp"
#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"
#include "monofix/subprocess_oracle.hpp"
#include "monofix/testbeds.hpp"
#include "monofix/verify.hpp"
#include "monofix/version.hpp"
