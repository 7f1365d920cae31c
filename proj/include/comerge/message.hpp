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

#ifndef COMERGE__MESSAGE_HPP_
#define COMERGE__MESSAGE_HPP_

#include "comerge/geometry.hpp"
#include "comerge/meta_action.hpp"

namespace comerge
{

/// Speech-act message: the sender discloses its state and binds itself to a maneuver.
struct Message
{
  int sender{0};
  long send_tick{0};

  // self-revealing
  Point2 position;
  int lane{0};
  bool on_ramp{false};
  double speed{0.0};
  double distance_to_merge{0.0};

  // self-committing
  MetaAction committed{MetaAction::kIdle};
  double window{3.0};  // s

  bool operator==(const Message &) const = default;
};

}  // namespace comerge

#endif  // COMERGE__MESSAGE_HPP_
