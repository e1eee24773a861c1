#pragma once

#include "vpg/core.hpp"
#include "vpg/dsp.hpp"
#include "vpg/error.hpp"
#include "vpg/experiment.hpp"
#include "vpg/io.hpp"
#include "vpg/models.hpp"
#include "vpg/nn/checkpoint.hpp"
#include "vpg/nn/gradcheck.hpp"
#include "vpg/nn/model.hpp"
#include "vpg/nn/optimizer.hpp"
#include "vpg/nn/train.hpp"
#include "vpg/synth.hpp"
#include "vpg/topomap.hpp"
#include "vpg/transform.hpp"
