#pragma once

// Everything except the command-line layer (classo/cli.hpp), which needs the
// vendored JSON header.

#include "classo/admm.hpp"
#include "classo/convex.hpp"
#include "classo/csv.hpp"
#include "classo/errors.hpp"
#include "classo/genlasso.hpp"
#include "classo/harness.hpp"
#include "classo/linalg.hpp"
#include "classo/model.hpp"
#include "classo/path.hpp"
