#pragma once

// Umbrella header for the library (the loop oracle lives separately in oracle.hpp).

#include "cecnet/cec_blocks.hpp"
#include "cecnet/checkpoint.hpp"
#include "cecnet/commands.hpp"
#include "cecnet/config.hpp"
#include "cecnet/conv.hpp"
#include "cecnet/element_connection.hpp"
#include "cecnet/encoder.hpp"
#include "cecnet/episode.hpp"
#include "cecnet/errors.hpp"
#include "cecnet/harness.hpp"
#include "cecnet/heads.hpp"
#include "cecnet/image_io.hpp"
#include "cecnet/ops.hpp"
#include "cecnet/optimizer.hpp"
#include "cecnet/patch_cluster.hpp"
#include "cecnet/synthetic.hpp"
#include "cecnet/tensor.hpp"
