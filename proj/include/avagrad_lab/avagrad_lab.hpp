#ifndef AVAGRAD_LAB_AVAGRAD_LAB_HPP_
#define AVAGRAD_LAB_AVAGRAD_LAB_HPP_

#include "avagrad_lab/core.hpp"
#include "avagrad_lab/optim.hpp"
#include "avagrad_lab/problems.hpp"
#include "avagrad_lab/runner.hpp"
#include "avagrad_lab/sweep.hpp"
#include "avagrad_lab/config.hpp"
#include "avagrad_lab/commands.hpp"

#endif  // AVAGRAD_LAB_AVAGRAD_LAB_HPP_
