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

#ifndef COMERGE__META_ACTION_HPP_
#define COMERGE__META_ACTION_HPP_

#include <array>
#include <optional>
#include <string_view>

namespace comerge
{

/// Discrete maneuver choice refined into a trajectory by the planner.
enum class MetaAction
{
  kLeft,
  kRight,
  kIdle,
  kAcc,
  kDec,
};

inline constexpr std::array<MetaAction, 5> kAllMetaActions{
  MetaAction::kLeft, MetaAction::kRight, MetaAction::kIdle, MetaAction::kAcc, MetaAction::kDec};

/// Upper-case wire token, as used by the reasoning protocol and traces.
inline constexpr std::string_view to_token(MetaAction a)
{
  switch (a) {
    case MetaAction::kLeft: return "LEFT";
    case MetaAction::kRight: return "RIGHT";
    case MetaAction::kIdle: return "IDLE";
    case MetaAction::kAcc: return "ACC";
    case MetaAction::kDec: return "DEC";
  }
  return "IDLE";
}

inline std::optional<MetaAction> parse_meta_action(std::string_view token)
{
  for (MetaAction a : kAllMetaActions) {
    if (to_token(a) == token) {
      return a;
    }
  }
  return std::nullopt;
}

inline constexpr bool is_lane_change(MetaAction a)
{
  return a == MetaAction::kLeft || a == MetaAction::kRight;
}

}  // namespace comerge

#endif  // COMERGE__META_ACTION_HPP_
