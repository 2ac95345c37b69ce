#pragma once

#include "embkit/checkpoint.hpp"
#include "embkit/config.hpp"
#include "embkit/data.hpp"
#include "embkit/datagen.hpp"
#include "embkit/error.hpp"
#include "embkit/eval.hpp"
#include "embkit/experiments.hpp"
#include "embkit/fixtures.hpp"
#include "embkit/loss.hpp"
#include "embkit/manifest.hpp"
#include "embkit/miner.hpp"
#include "embkit/model.hpp"
#include "embkit/optim.hpp"
#include "embkit/tokenizer.hpp"
#include "embkit/trainer.hpp"
