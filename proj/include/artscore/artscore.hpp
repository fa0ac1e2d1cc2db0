#pragma once

// Umbrella header for the artness scoring library.

#include "artscore/checkpoint.hpp"
#include "artscore/clustering.hpp"
#include "artscore/core.hpp"
#include "artscore/dataset.hpp"
#include "artscore/evaluation.hpp"
#include "artscore/image.hpp"
#include "artscore/model_zoo.hpp"
#include "artscore/pipeline.hpp"
#include "artscore/ranker.hpp"
#include "artscore/serial.hpp"
#include "artscore/style.hpp"
