#pragma once

#include "pfm/bench.hpp"
#include "pfm/cg.hpp"
#include "pfm/common.hpp"
#include "pfm/config.hpp"
#include "pfm/eigensolver.hpp"
#include "pfm/energy.hpp"
#include "pfm/geodesic.hpp"
#include "pfm/laplacian.hpp"
#include "pfm/matrix_io.hpp"
#include "pfm/mesh.hpp"
#include "pfm/mesh_io.hpp"
#include "pfm/perturbation.hpp"
#include "pfm/pipeline.hpp"
#include "pfm/shapes.hpp"
#include "pfm/shot.hpp"
#include "pfm/solver.hpp"
#include "pfm/spectral.hpp"
