#pragma once

// Umbrella header: the full graph-realization toolkit.

#include "stitch3d/align.hpp"
#include "stitch3d/benchmark.hpp"
#include "stitch3d/cmds.hpp"
#include "stitch3d/common.hpp"
#include "stitch3d/connectivity.hpp"
#include "stitch3d/generate.hpp"
#include "stitch3d/graph_io.hpp"
#include "stitch3d/localize_sdp.hpp"
#include "stitch3d/metrics.hpp"
#include "stitch3d/patches.hpp"
#include "stitch3d/pipeline.hpp"
#include "stitch3d/refine.hpp"
#include "stitch3d/rng.hpp"
#include "stitch3d/sdp.hpp"
#include "stitch3d/spectral.hpp"
#include "stitch3d/sync_o3.hpp"
#include "stitch3d/sync_z2.hpp"
#include "stitch3d/translations.hpp"
#include "stitch3d/types.hpp"
