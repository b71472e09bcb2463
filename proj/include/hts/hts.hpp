#pragma once

#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/hierarchy.hpp"
#include "hts/dataset.hpp"
#include "hts/forecasting.hpp"
#include "hts/baseline.hpp"
#include "hts/neural.hpp"
#include "hts/model_io.hpp"
#include "hts/metrics.hpp"
#include "hts/evaluation.hpp"
