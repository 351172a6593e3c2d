#pragma once

#include "regseg/aggregate.hpp"
#include "regseg/error.hpp"
#include "regseg/ingest.hpp"
#include "regseg/parallel.hpp"
#include "regseg/segmentation.hpp"
#include "regseg/serialize.hpp"
#include "regseg/stats.hpp"
#include "regseg/synthetic.hpp"
