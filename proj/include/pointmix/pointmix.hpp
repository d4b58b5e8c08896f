// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_POINTMIX_HPP
#define POINTMIX_POINTMIX_HPP

#include "pointmix/augment.hpp"
#include "pointmix/config.hpp"
#include "pointmix/core.hpp"
#include "pointmix/cutmix.hpp"
#include "pointmix/eval.hpp"
#include "pointmix/geom.hpp"
#include "pointmix/io.hpp"
#include "pointmix/mixup.hpp"
#include "pointmix/parallel.hpp"
#include "pointmix/pipeline.hpp"
#include "pointmix/synth.hpp"

#endif  // POINTMIX_POINTMIX_HPP
