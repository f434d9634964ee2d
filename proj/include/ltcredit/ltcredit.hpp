#pragma once

#include "ltcredit/archimedean.hpp"
#include "ltcredit/asymptotics.hpp"
#include "ltcredit/errors.hpp"
#include "ltcredit/estimators.hpp"
#include "ltcredit/portfolio.hpp"
#include "ltcredit/rng.hpp"
#include "ltcredit/stable_dist.hpp"
