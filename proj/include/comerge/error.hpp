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

#ifndef COMERGE__ERROR_HPP_
#define COMERGE__ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace comerge
{

enum class ErrorKind
{
  kSingularConfiguration,
  kFlatnessSingularity,
  kInfeasibleManeuver,
  kInvalidArgument,
  kShape,
  kOffRoad,
  kConfig,
  kParse,
  kUnknownAgent,
  kTransport,
  kTrace,
  kDataset,
  kIo,
};

inline constexpr std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::kSingularConfiguration: return "singular_configuration";
    case ErrorKind::kFlatnessSingularity: return "flatness_singularity";
    case ErrorKind::kInfeasibleManeuver: return "infeasible_maneuver";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kOffRoad: return "off_road";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kUnknownAgent: return "unknown_agent";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kTrace: return "trace";
    case ErrorKind::kDataset: return "dataset";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string & what)
  : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept {return kind_;}

private:
  ErrorKind kind_;
};

/// Parse failure that remembers where in the input it happened.
class ParseError : public Error
{
public:
  ParseError(std::size_t waypoint, std::size_t position, const std::string & what)
  : Error(ErrorKind::kParse, what), waypoint_(waypoint), position_(position) {}

  std::size_t waypoint() const noexcept {return waypoint_;}
  std::size_t position() const noexcept {return position_;}

private:
  std::size_t waypoint_;
  std::size_t position_;
};

/// Trace failure tied to a tick record (or the header/footer when tick is npos).
class TraceError : public Error
{
public:
  static constexpr long kNoTick = -1;

  TraceError(long tick, const std::string & what)
  : Error(ErrorKind::kTrace, what), tick_(tick) {}

  long tick() const noexcept {return tick_;}

private:
  long tick_;
};

}  // namespace comerge

#endif  // COMERGE__ERROR_HPP_
