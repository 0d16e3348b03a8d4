#pragma once

// Umbrella header.
#include "timefuse/adf.hpp"
#include "timefuse/baselines.hpp"
#include "timefuse/error.hpp"
#include "timefuse/evaluation.hpp"
#include "timefuse/fusor.hpp"
#include "timefuse/interchange.hpp"
#include "timefuse/meta_dataset.hpp"
#include "timefuse/meta_features.hpp"
#include "timefuse/parallel.hpp"
#include "timefuse/random.hpp"
#include "timefuse/shard_io.hpp"
#include "timefuse/spectral.hpp"
#include "timefuse/stats.hpp"
#include "timefuse/synthetic.hpp"
#include "timefuse/tensor.hpp"

