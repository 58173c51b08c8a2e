#pragma once

#include <memory>
#include <string>

#include "meshprof/builder.hpp"
#include "meshprof/domain.hpp"

namespace meshprof {

/// A profile function together with the grid it is defined on.
struct ProfileSource {
  ProfileFunction profile;
  GridDomain domain;
  std::string description;
};

/// Builds an in-process fixture from a spec string:
///   const:V[,V...]   sum   step:X   bowl   spike:W   ramp   zeromean:EPS
///   scene:NAME:QUANTITY[:depth=D][:dir]
/// NAME is "default" or a scene JSON file; QUANTITY is numvisible, classified,
/// tests, polygons, cost or brute.
ProfileSource fixture_source(const std::string& spec, const IndexVec& extents);

/// Profiles an external command, one process per query. The command runs
/// through /bin/sh with the cell indices appended as arguments and the
/// environment variables MESHPROF_INDEX and MESHPROF_COORD set (comma
/// separated). Its stdout must hold `arity` decimal numbers.
ProfileFunction exec_profile(const std::string& command, const GridDomain& domain,
                             std::size_t arity, bool thread_safe = true);

/// Persists every computed value to `<dir>/<key>.csv` and serves later runs
/// from that file, so an interrupted build resumes without re-running queries.
ProfileFunction persistent_profile(ProfileFunction f, const GridDomain& domain,
                                   const std::string& dir, const std::string& key);

}  // namespace meshprof
