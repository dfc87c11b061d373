#pragma once

#include "biliseg/errors.hpp"
#include "biliseg/metrics.hpp"
#include "biliseg/nifti.hpp"
#include "biliseg/parallel.hpp"
#include "biliseg/phantom.hpp"
#include "biliseg/phantom_json.hpp"
#include "biliseg/pipeline.hpp"
#include "biliseg/preprocess.hpp"
#include "biliseg/report.hpp"
#include "biliseg/segmentation.hpp"
#include "biliseg/stats.hpp"
#include "biliseg/stl.hpp"
#include "biliseg/volume_core.hpp"
