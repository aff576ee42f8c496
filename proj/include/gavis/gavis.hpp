// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/io.hpp>
#include <gavis/model.hpp>
#include <gavis/oracle.hpp>
#include <gavis/parallel.hpp>
#include <gavis/planner.hpp>
#include <gavis/raster.hpp>
#include <gavis/rng.hpp>
#include <gavis/sh.hpp>
#include <gavis/uncertainty.hpp>
#include <gavis/vfield.hpp>
