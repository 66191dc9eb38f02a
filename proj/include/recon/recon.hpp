#pragma once

#include "recon/constraint_builder.hpp"
#include "recon/csv.hpp"
#include "recon/errors.hpp"
#include "recon/hierarchy.hpp"
#include "recon/matrix_market.hpp"
#include "recon/pipeline.hpp"
#include "recon/solvers.hpp"
#include "recon/sparse_core.hpp"
#include "recon/synthetic.hpp"
#include "recon/weighting.hpp"
