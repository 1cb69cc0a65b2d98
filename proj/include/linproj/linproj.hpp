#pragma once

#include "linproj/backward.hpp"
#include "linproj/canonicalize.hpp"
#include "linproj/dual.hpp"
#include "linproj/errors.hpp"
#include "linproj/fixtures.hpp"
#include "linproj/gradcheck.hpp"
#include "linproj/layer.hpp"
#include "linproj/operator.hpp"
#include "linproj/parallel.hpp"
#include "linproj/solver.hpp"
#include "linproj/spectral_norm.hpp"
#include "linproj/vector_ops.hpp"
