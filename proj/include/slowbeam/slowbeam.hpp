// Copyright 2026 The slowbeam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header.

#ifndef SLOWBEAM_SLOWBEAM_HPP
#define SLOWBEAM_SLOWBEAM_HPP

#include "slowbeam/analytics.hpp"
#include "slowbeam/beamformers.hpp"
#include "slowbeam/channel_model.hpp"
#include "slowbeam/estimation.hpp"
#include "slowbeam/patch_engine.hpp"
#include "slowbeam/receiver.hpp"
#include "slowbeam/rng.hpp"
#include "slowbeam/runner.hpp"
#include "slowbeam/scenario.hpp"
#include "slowbeam/types.hpp"

#endif  // SLOWBEAM_SLOWBEAM_HPP
