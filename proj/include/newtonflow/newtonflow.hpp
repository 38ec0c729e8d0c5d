#ifndef NEWTONFLOW_NEWTONFLOW_HPP
#define NEWTONFLOW_NEWTONFLOW_HPP

// Umbrella header: elliptic Newton flows from divisor to certified portrait.

#include "newtonflow/error.hpp"
#include "newtonflow/lattice.hpp"
#include "newtonflow/weierstrass.hpp"
#include "newtonflow/efun.hpp"
#include "newtonflow/contour.hpp"
#include "newtonflow/flow.hpp"
#include "newtonflow/equilibria.hpp"
#include "newtonflow/stability.hpp"
#include "newtonflow/portrait.hpp"
#include "newtonflow/json_io.hpp"

#endif // NEWTONFLOW_NEWTONFLOW_HPP
