#pragma once

// Umbrella header for the LEFT tri-view anomaly detection library.

#include "left/autograd.hpp"
#include "left/checkpoint.hpp"
#include "left/data.hpp"
#include "left/decoders.hpp"
#include "left/fft.hpp"
#include "left/filterbank.hpp"
#include "left/fit.hpp"
#include "left/fusion.hpp"
#include "left/losses.hpp"
#include "left/metrics.hpp"
#include "left/model.hpp"
#include "left/nn.hpp"
#include "left/plot.hpp"
#include "left/prototypes.hpp"
#include "left/runner.hpp"
#include "left/scoring.hpp"
#include "left/stft.hpp"
#include "left/tensor.hpp"
#include "left/tokenizers.hpp"
#include "left/training.hpp"
