#pragma once

#include <filesystem>
#include <iosfwd>

#include "photocool/simulator.hpp"

namespace photocool {

/// Binary trajectory layout (all little-endian):
///   8 bytes   magic "PTCL1\0\0\0"
///   uint64    sample count n
///   uint64    column count (4: t, x, p, F_ph)
///   uint64    seed
///   float64   sample interval, s
///   then the columns one after another, n float64 each.
void write_trajectory_binary(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_binary(std::istream& in);

/// CSV with header t_s,x_m,p_kg_m_s,F_ph_N at 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

void write_trajectory_binary(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_binary(const std::filesystem::path& path);

}  // namespace photocool
