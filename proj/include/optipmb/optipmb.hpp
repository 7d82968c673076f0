#pragma once

#include "optipmb/association.hpp"
#include "optipmb/common.hpp"
#include "optipmb/density.hpp"
#include "optipmb/filter.hpp"
#include "optipmb/geometry.hpp"
#include "optipmb/io.hpp"
#include "optipmb/metrics.hpp"
#include "optipmb/motion.hpp"
#include "optipmb/params.hpp"
#include "optipmb/preprocess.hpp"
#include "optipmb/simulate.hpp"
#include "optipmb/tracker.hpp"
#include "optipmb/tracks.hpp"
