/*
 * Copyright 2026 The GeoXAI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "geoxai/analytics.hpp"
#include "geoxai/bridge.hpp"
#include "geoxai/config.hpp"
#include "geoxai/error.hpp"
#include "geoxai/gbdt.hpp"
#include "geoxai/geoshapley.hpp"
#include "geoxai/matrix.hpp"
#include "geoxai/metrics.hpp"
#include "geoxai/parallel.hpp"
#include "geoxai/predictor.hpp"
#include "geoxai/rng.hpp"
#include "geoxai/synth.hpp"
#include "geoxai/tabular.hpp"
#include "geoxai/tuner.hpp"
