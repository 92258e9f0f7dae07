#pragma once

#include "relalg/expr.hpp"
#include "relalg/rules.hpp"
#include "relalg/exterior.hpp"
#include "relalg/matrix.hpp"
#include "relalg/algebroid.hpp"
#include "relalg/prolong.hpp"
#include "relalg/jets.hpp"
#include "relalg/dsl.hpp"
