#pragma once

#include "revcal/assigner.hpp"
#include "revcal/calibrator.hpp"
#include "revcal/common.hpp"
#include "revcal/csv.hpp"
#include "revcal/dequantizer.hpp"
#include "revcal/likert.hpp"
#include "revcal/pipeline.hpp"
#include "revcal/reports.hpp"
#include "revcal/review_data.hpp"
#include "revcal/scoring.hpp"
