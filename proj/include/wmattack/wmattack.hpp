#pragma once

#include "wmattack/attack.hpp"
#include "wmattack/codec.hpp"
#include "wmattack/corpus.hpp"
#include "wmattack/distortions.hpp"
#include "wmattack/image.hpp"
#include "wmattack/metrics.hpp"
#include "wmattack/pipeline.hpp"
#include "wmattack/png_io.hpp"
#include "wmattack/version.hpp"
