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

#ifndef COMERGE__TRAJECTORY_HPP_
#define COMERGE__TRAJECTORY_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "comerge/error.hpp"
#include "comerge/geometry.hpp"

namespace comerge::planning
{

/// Waypoints at uniform time spacing; points[0] is the pose at decision time.
struct Trajectory
{
  std::vector<Point2> points;
  double dt{0.1};

  double horizon() const {return static_cast<double>(points.size()) * dt;}
  bool operator==(const Trajectory &) const = default;
};

// Word-level trajectory text. Grammar:
//   sequence := waypoint*
//   waypoint := number ',' number ';'
//   number   := '-'? digit+ ('.' digit+)?
// The tokenizer always emits exactly two fractional digits (1 cm grid).
inline constexpr std::string_view kVocabulary = "0123456789-.,;";
inline constexpr double kTokenGrid = 0.01;
inline constexpr double kMaxTokenCoordinate = 10000.0;

inline std::size_t token_index(char c)
{
  const auto pos = kVocabulary.find(c);
  if (pos == std::string_view::npos) {
    throw Error(ErrorKind::kInvalidArgument, std::string("character outside the vocabulary: ") + c);
  }
  return pos;
}

/// Sequence of single-character word tokens over kVocabulary.
class TokenSequence
{
public:
  TokenSequence() = default;
  explicit TokenSequence(std::string text)
  : text_(std::move(text))
  {
    for (char c : text_) {
      (void)token_index(c);
    }
  }

  std::size_t size() const {return text_.size();}
  bool empty() const {return text_.empty();}
  char operator[](std::size_t i) const {return text_[i];}
  const std::string & str() const {return text_;}

  std::vector<std::size_t> indices() const
  {
    std::vector<std::size_t> out;
    out.reserve(text_.size());
    for (char c : text_) {
      out.push_back(token_index(c));
    }
    return out;
  }

  bool operator==(const TokenSequence &) const = default;

private:
  std::string text_;
};

namespace detail
{
inline void append_fixed2(std::string & out, double v)
{
  const long long centi = std::llround(v * 100.0);
  const unsigned long long mag = static_cast<unsigned long long>(centi < 0 ? -centi : centi);
  if (centi < 0) {
    out.push_back('-');
  }
  out += std::to_string(mag / 100);
  out.push_back('.');
  const unsigned long long frac = mag % 100;
  out.push_back(static_cast<char>('0' + frac / 10));
  out.push_back(static_cast<char>('0' + frac % 10));
}
}  // namespace detail

inline TokenSequence tokenize_trajectory(std::span<const Point2> points)
{
  std::string out;
  out.reserve(points.size() * 14);
  for (const Point2 & p : points) {
    for (double v : {p.x, p.y}) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kInvalidArgument, "tokenize: non-finite coordinate");
      }
      if (std::abs(v) > kMaxTokenCoordinate) {
        throw Error(ErrorKind::kInvalidArgument, "tokenize: coordinate beyond +-10000 m");
      }
    }
    detail::append_fixed2(out, p.x);
    out.push_back(',');
    detail::append_fixed2(out, p.y);
    out.push_back(';');
  }
  return TokenSequence(std::move(out));
}

inline TokenSequence tokenize_trajectory(const Trajectory & t)
{
  return tokenize_trajectory(std::span<const Point2>(t.points));
}

/// Parses text in the trajectory grammar. Errors carry the waypoint index and
/// the character offset where parsing stopped.
inline std::vector<Point2> detokenize_points(std::string_view text)
{
  std::vector<Point2> out;
  std::size_t pos = 0;
  std::size_t waypoint = 0;
  auto fail = [&](const std::string & what) {
      throw ParseError(
              waypoint, pos,
              "trajectory parse error at waypoint " + std::to_string(waypoint) + ", offset " +
              std::to_string(pos) + ": " + what);
    };
  auto number = [&]() {
      const std::size_t start = pos;
      if (pos < text.size() && text[pos] == '-') {
        ++pos;
      }
      const std::size_t int_start = pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        ++pos;
      }
      if (pos == int_start) {
        fail("expected digit");
      }
      if (pos < text.size() && text[pos] == '.') {
        ++pos;
        const std::size_t frac_start = pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
          ++pos;
        }
        if (pos == frac_start) {
          fail("expected fractional digit");
        }
      }
      double v = 0.0;
      const auto res = std::from_chars(text.data() + start, text.data() + pos, v);
      if (res.ec != std::errc{} || res.ptr != text.data() + pos) {
        fail("number out of range");
      }
      return v;
    };
  auto expect = [&](char c) {
      if (pos >= text.size() || text[pos] != c) {
        fail(std::string("expected '") + c + "'");
      }
      ++pos;
    };
  while (pos < text.size()) {
    Point2 p;
    p.x = number();
    expect(',');
    p.y = number();
    expect(';');
    out.push_back(p);
    ++waypoint;
  }
  return out;
}

inline Trajectory detokenize_trajectory(const TokenSequence & tokens, double dt = 0.1)
{
  return Trajectory{detokenize_points(tokens.str()), dt};
}

struct LmLoss
{
  double value{0.0};
  bool infinite{false};
};

/// Sum of negative log-probabilities of each target token under its
/// per-position distribution over the vocabulary.
inline LmLoss lm_loss(
  std::span<const std::size_t> target, const std::vector<std::vector<double>> & probs,
  std::size_t vocab_size = kVocabulary.size())
{
  if (probs.size() != target.size()) {
    throw Error(ErrorKind::kShape, "lm_loss: one distribution per target position is required");
  }
  LmLoss out;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto & row = probs[i];
    if (row.size() != vocab_size || target[i] >= vocab_size) {
      throw Error(ErrorKind::kShape, "lm_loss: distribution size does not match the vocabulary");
    }
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw Error(ErrorKind::kInvalidArgument, "lm_loss: probabilities must be finite and >= 0");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw Error(ErrorKind::kInvalidArgument, "lm_loss: distribution does not sum to 1");
    }
    const double p = row[target[i]];
    if (p == 0.0) {
      out.infinite = true;
      out.value = std::numeric_limits<double>::infinity();
    } else if (!out.infinite) {
      out.value -= std::log(p);
    }
  }
  if (!out.infinite && out.value == 0.0) {
    out.value = 0.0;  // drop a -0.0 from log(1)
  }
  return out;
}

inline LmLoss lm_loss(const TokenSequence & target, const std::vector<std::vector<double>> & probs)
{
  const auto idx = target.indices();
  return lm_loss(idx, probs);
}

/// Length-normalised variant used inside the reflection objective.
inline LmLoss lm_loss_mean(
  std::span<const std::size_t> target, const std::vector<std::vector<double>> & probs,
  std::size_t vocab_size = kVocabulary.size())
{
  if (target.empty()) {
    throw Error(ErrorKind::kShape, "lm_loss_mean: empty target");
  }
  LmLoss out = lm_loss(target, probs, vocab_size);
  if (!out.infinite) {
    out.value /= static_cast<double>(target.size());
  }
  return out;
}

}  // namespace comerge::planning

#endif  // COMERGE__TRAJECTORY_HPP_
