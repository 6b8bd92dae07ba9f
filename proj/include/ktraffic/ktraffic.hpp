#pragma once

#include "ktraffic/diagrams.hpp"
#include "ktraffic/dynamics.hpp"
#include "ktraffic/equilibrium.hpp"
#include "ktraffic/error.hpp"
#include "ktraffic/format.hpp"
#include "ktraffic/io.hpp"
#include "ktraffic/lattice_games.hpp"
#include "ktraffic/verify.hpp"
