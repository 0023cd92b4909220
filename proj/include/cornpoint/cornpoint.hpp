#pragma once

// Umbrella header for the cornpoint stalk-insertion simulator.

#include "cornpoint/geometry.hpp"
#include "cornpoint/rng.hpp"
#include "cornpoint/scene.hpp"
#include "cornpoint/render.hpp"
#include "cornpoint/detect.hpp"
#include "cornpoint/select.hpp"
#include "cornpoint/insertion.hpp"
#include "cornpoint/io.hpp"
#include "cornpoint/harness.hpp"
#include "cornpoint/report.hpp"
