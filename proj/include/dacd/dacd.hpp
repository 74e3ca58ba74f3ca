#pragma once

#include "dacd/error.hpp"
#include "dacd/eval.hpp"
#include "dacd/features.hpp"
#include "dacd/filters.hpp"
#include "dacd/image.hpp"
#include "dacd/locgrid.hpp"
#include "dacd/match.hpp"
#include "dacd/mining.hpp"
#include "dacd/overlay.hpp"
#include "dacd/pairing.hpp"
#include "dacd/pipeline.hpp"
#include "dacd/synth.hpp"
#include "dacd/translate.hpp"
