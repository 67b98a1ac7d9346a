#pragma once

#include "unravel/cocluster.hpp"
#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"
#include "unravel/eval.hpp"
#include "unravel/ingest.hpp"
#include "unravel/kmeans.hpp"
#include "unravel/recommend.hpp"
#include "unravel/report.hpp"
#include "unravel/similarity.hpp"
#include "unravel/spectral.hpp"
