#pragma once

// Everything in one include.

#include "distill_lab/autodiff.hpp"
#include "distill_lab/bounds.hpp"
#include "distill_lab/distill.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/flow.hpp"
#include "distill_lab/instance.hpp"
#include "distill_lab/spectral.hpp"

#include "distill_lab/mae/checkpoint.hpp"
#include "distill_lab/mae/data.hpp"
#include "distill_lab/mae/losses.hpp"
#include "distill_lab/mae/model.hpp"
#include "distill_lab/mae/pipeline.hpp"
#include "distill_lab/mae/train.hpp"

#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/family.hpp"
#include "distill_lab/experiment/run.hpp"
