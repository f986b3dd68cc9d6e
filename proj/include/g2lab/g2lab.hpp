#ifndef G2LAB_G2LAB_HPP
#define G2LAB_G2LAB_HPP

#include "g2lab/bloch.hpp"
#include "g2lab/config.hpp"
#include "g2lab/correlator.hpp"
#include "g2lab/detection.hpp"
#include "g2lab/errors.hpp"
#include "g2lab/estimators.hpp"
#include "g2lab/histogram_io.hpp"
#include "g2lab/pipeline.hpp"
#include "g2lab/random.hpp"
#include "g2lab/sources.hpp"
#include "g2lab/timetag.hpp"
#include "g2lab/timetag_io.hpp"

#endif  // G2LAB_G2LAB_HPP
