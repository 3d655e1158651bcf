#pragma once

#include "sandro/config.hpp"
#include "sandro/error.hpp"
#include "sandro/features.hpp"
#include "sandro/geometry.hpp"
#include "sandro/io.hpp"
#include "sandro/kdtree.hpp"
#include "sandro/pipeline.hpp"
#include "sandro/ply_io.hpp"
#include "sandro/solver.hpp"
#include "sandro/splitting.hpp"
#include "sandro/synthbench.hpp"
