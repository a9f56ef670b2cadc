#pragma once

#include "catephi/annotation.hpp"
#include "catephi/commands.hpp"
#include "catephi/config.hpp"
#include "catephi/dataset.hpp"
#include "catephi/dgp.hpp"
#include "catephi/encoder.hpp"
#include "catephi/errors.hpp"
#include "catephi/estimators.hpp"
#include "catephi/eval.hpp"
#include "catephi/matrix.hpp"
#include "catephi/mlp.hpp"
#include "catephi/plot.hpp"
#include "catephi/rng.hpp"
