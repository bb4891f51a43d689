#pragma once

#include "lemur/bench.hpp"
#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/manifest.hpp"
#include "lemur/maxsim.hpp"
#include "lemur/mips.hpp"
#include "lemur/model.hpp"
#include "lemur/ols.hpp"
#include "lemur/pipeline.hpp"
#include "lemur/synth.hpp"
#include "lemur/train.hpp"
