#pragma once

#include "tissue_affordance/core.hpp"
#include "tissue_affordance/kinematics.hpp"
#include "tissue_affordance/geometry.hpp"
#include "tissue_affordance/solver.hpp"
#include "tissue_affordance/stiffness.hpp"
#include "tissue_affordance/analysis.hpp"
#include "tissue_affordance/affordance.hpp"
#include "tissue_affordance/evaluation.hpp"
#include "tissue_affordance/synthetic.hpp"
#include "tissue_affordance/io.hpp"
#include "tissue_affordance/export.hpp"
