#pragma once

/// \file pfem.hpp
/// \brief Umbrella header.

#include "assembly.hpp"
#include "bc.hpp"
#include "core.hpp"
#include "distributed.hpp"
#include "dofmap.hpp"
#include "fe.hpp"
#include "flow_problems.hpp"
#include "form.hpp"
#include "gmsh.hpp"
#include "krylov.hpp"
#include "local_solvers.hpp"
#include "mesh.hpp"
#include "output.hpp"
#include "params.hpp"
#include "partition.hpp"
#include "poisson.hpp"
#include "schwarz.hpp"
#include "sparse.hpp"
#include "splitting.hpp"
