#pragma once

#include "hilite/align.hpp"
#include "hilite/chatenc.hpp"
#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/evalkit.hpp"
#include "hilite/framefeat.hpp"
#include "hilite/nn/checkpoint.hpp"
#include "hilite/nn/dataset.hpp"
#include "hilite/nn/lstm.hpp"
#include "hilite/nn/model.hpp"
#include "hilite/nn/predict.hpp"
#include "hilite/nn/train.hpp"
#include "hilite/synth.hpp"
