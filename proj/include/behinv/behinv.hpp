#pragma once

#include "behinv/constrained.hpp"
#include "behinv/dob.hpp"
#include "behinv/errors.hpp"
#include "behinv/experiment.hpp"
#include "behinv/hankel.hpp"
#include "behinv/inversion.hpp"
#include "behinv/io.hpp"
#include "behinv/lti.hpp"
#include "behinv/numerics.hpp"
#include "behinv/types.hpp"
