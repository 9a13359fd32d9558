#pragma once

// Umbrella include for the moving-mesh adaptation library.

#include "mmesh/assembly.hpp"
#include "mmesh/checks.hpp"
#include "mmesh/config.hpp"
#include "mmesh/core.hpp"
#include "mmesh/experiment.hpp"
#include "mmesh/fields.hpp"
#include "mmesh/flow.hpp"
#include "mmesh/functional.hpp"
#include "mmesh/interp.hpp"
#include "mmesh/mesh.hpp"
#include "mmesh/metric.hpp"
#include "mmesh/ode.hpp"
#include "mmesh/quality.hpp"
#include "mmesh/random.hpp"
#include "mmesh/solver.hpp"
#include "mmesh/vtk.hpp"
