#pragma once

#include "facts.hpp"
#include "rules.hpp"
#include "terms.hpp"
