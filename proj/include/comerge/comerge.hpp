// Copyright 2026 The CoMerge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef COMERGE__COMERGE_HPP_
#define COMERGE__COMERGE_HPP_

#include "comerge/communication.hpp"
#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/geometry.hpp"
#include "comerge/message.hpp"
#include "comerge/meta_action.hpp"
#include "comerge/metrics.hpp"
#include "comerge/obb.hpp"
#include "comerge/observation.hpp"
#include "comerge/perception.hpp"
#include "comerge/planning.hpp"
#include "comerge/quintic.hpp"
#include "comerge/reflection.hpp"
#include "comerge/rng.hpp"
#include "comerge/scenario.hpp"
#include "comerge/simulation.hpp"
#include "comerge/trajectory.hpp"
#include "comerge/transport.hpp"
#include "comerge/harness/config.hpp"
#include "comerge/harness/dataset.hpp"
#include "comerge/harness/episode.hpp"
#include "comerge/harness/trace.hpp"

#endif  // COMERGE__COMERGE_HPP_
