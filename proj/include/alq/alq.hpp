#pragma once

#include "alq/bitpack.hpp"
#include "alq/ecgnet.hpp"
#include "alq/eval.hpp"
#include "alq/qinfer.hpp"
#include "alq/quant_model.hpp"
#include "alq/quantizer.hpp"
#include "alq/signal_data.hpp"
