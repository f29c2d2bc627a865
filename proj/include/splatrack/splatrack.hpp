#pragma once

// Umbrella header: rigid projectile trajectory recovery for splat-rendered
// objects. Pull in individual headers instead when compile times matter.

#include "splatrack/adam.hpp"
#include "splatrack/camera.hpp"
#include "splatrack/dsa.hpp"
#include "splatrack/errors.hpp"
#include "splatrack/gaussian_cloud.hpp"
#include "splatrack/image.hpp"
#include "splatrack/kalman.hpp"
#include "splatrack/metrics.hpp"
#include "splatrack/physics.hpp"
#include "splatrack/pipeline_io.hpp"
#include "splatrack/png_io.hpp"
#include "splatrack/recovery.hpp"
#include "splatrack/renderer.hpp"
#include "splatrack/rng.hpp"
#include "splatrack/se3.hpp"
#include "splatrack/serialization.hpp"
#include "splatrack/simulator.hpp"
#include "splatrack/ssim.hpp"
