#pragma once

#include "spinprop/algebra.hpp"
#include "spinprop/exponentiator.hpp"
#include "spinprop/fields.hpp"
#include "spinprop/integrator.hpp"
#include "spinprop/oracle.hpp"
#include "spinprop/propagator.hpp"
