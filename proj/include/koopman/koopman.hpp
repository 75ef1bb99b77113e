#pragma once

#include "koopman/cli.hpp"
#include "koopman/config.hpp"
#include "koopman/dataset.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/evaluation.hpp"
#include "koopman/io.hpp"
#include "koopman/kernels.hpp"
#include "koopman/linalg.hpp"
#include "koopman/operator.hpp"
#include "koopman/solvers.hpp"
