#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgcinf {

using NodeId = std::int32_t;

/// Undirected edge, stored canonically with a < b.
struct Edge {
  NodeId a = 0;
  NodeId b = 0;

  Edge() = default;
  Edge(NodeId x, NodeId y) : a(x < y ? x : y), b(x < y ? y : x) {}

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class TargetKind { EdgeRemoval, NodeRemoval, SampleRemoval };

/// A removal target. `b` is -1 for node and sample targets.
struct Target {
  TargetKind kind = TargetKind::EdgeRemoval;
  NodeId a = 0;
  NodeId b = -1;

  static Target edge(Edge e) { return {TargetKind::EdgeRemoval, e.a, e.b}; }
  static Target node(NodeId v) { return {TargetKind::NodeRemoval, v, -1}; }
  static Target sample(NodeId v) { return {TargetKind::SampleRemoval, v, -1}; }

  friend bool operator==(const Target&, const Target&) = default;
};

inline const char* target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::EdgeRemoval: return "edge";
    case TargetKind::NodeRemoval: return "node";
    case TargetKind::SampleRemoval: return "sample";
  }
  return "unknown";
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingEdge : Error {
  using Error::Error;
};
struct OutOfRange : Error {
  using Error::Error;
};
struct NonConvergence : Error {
  using Error::Error;
};
struct SolverStall : Error {
  using Error::Error;
};
struct DegenerateDenominator : Error {
  using Error::Error;
};
struct DegenerateInput : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  std::string file;
  long line = 0;
  ParseError(std::string f, long ln, const std::string& what)
      : Error(f + ":" + std::to_string(ln) + ": " + what), file(std::move(f)), line(ln) {}
};

}  // namespace sgcinf
