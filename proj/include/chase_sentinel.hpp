#pragma once

#include "chase_sentinel/model.hpp"
#include "chase_sentinel/ruleio.hpp"
#include "chase_sentinel/matcher.hpp"
#include "chase_sentinel/chase.hpp"
#include "chase_sentinel/approx.hpp"
#include "chase_sentinel/cyclicity.hpp"
#include "chase_sentinel/termination.hpp"
