#pragma once

#include "rkit/comparison.hpp"
#include "rkit/error.hpp"
#include "rkit/expr.hpp"
#include "rkit/io.hpp"
#include "rkit/linalg.hpp"
#include "rkit/manifold.hpp"
#include "rkit/normal.hpp"
#include "rkit/ode.hpp"
#include "rkit/surfrev.hpp"
#include "rkit/tensor.hpp"
#include "rkit/transport.hpp"
#include "rkit/variation.hpp"

namespace rkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rkit
