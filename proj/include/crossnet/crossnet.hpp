// Umbrella header.
#pragma once

#include "crossnet/aspects.hpp"
#include "crossnet/autodiff.hpp"
#include "crossnet/checkpoint.hpp"
#include "crossnet/corpus.hpp"
#include "crossnet/metrics.hpp"
#include "crossnet/model.hpp"
#include "crossnet/protocol.hpp"
#include "crossnet/rng.hpp"
#include "crossnet/tensor.hpp"
#include "crossnet/trainer.hpp"
