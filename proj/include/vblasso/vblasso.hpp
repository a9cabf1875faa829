#pragma once

#include "errors.hpp"
#include "gibbs.hpp"
#include "io.hpp"
#include "knot_search.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "selection.hpp"
#include "simstudio.hpp"
#include "specfun.hpp"
#include "spline.hpp"
#include "vb_lasso.hpp"

namespace vblasso {

#ifdef VBLASSO_VERSION
inline constexpr const char* version = VBLASSO_VERSION;
#else
inline constexpr const char* version = "0.0.0";
#endif

}  // namespace vblasso
