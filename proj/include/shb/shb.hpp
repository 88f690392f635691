#pragma once

#include "shb/analysis.hpp"
#include "shb/format.hpp"
#include "shb/gradients.hpp"
#include "shb/harness.hpp"
#include "shb/masking.hpp"
#include "shb/noise.hpp"
#include "shb/objectives.hpp"
#include "shb/optimizers.hpp"
#include "shb/rng.hpp"
#include "shb/schedules.hpp"
#include "shb/trace.hpp"
#include "shb/vector_ops.hpp"
#include "shb/verification.hpp"
