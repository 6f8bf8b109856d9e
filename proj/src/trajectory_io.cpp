#include "photocool/trajectory_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "photocool/error.hpp"

namespace photocool {

namespace {

constexpr std::array<char, 8> magic = {'P', 'T', 'C', 'L', '1', '\0', '\0', '\0'};
constexpr std::uint64_t column_count = 4;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(b.data(), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw Error(ErrorKind::io_error, "truncated trajectory file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void write_trajectory_binary(std::ostream& out, const Trajectory& traj) {
  out.write(magic.data(), magic.size());
  const std::uint64_t n = traj.x.size();
  put_u64(out, n);
  put_u64(out, column_count);
  put_u64(out, traj.seed);
  put_f64(out, traj.sample_interval);
  for (const auto* col : {&traj.times, &traj.x, &traj.p, &traj.force}) {
    for (double v : *col) put_f64(out, v);
  }
  if (!out) throw Error(ErrorKind::io_error, "failed to write trajectory");
}

Trajectory read_trajectory_binary(std::istream& in) {
  std::array<char, 8> head{};
  in.read(head.data(), head.size());
  if (!in || head != magic) throw Error(ErrorKind::parse_error, "not a PTCL1 trajectory file");
  Trajectory traj;
  const std::uint64_t n = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  if (cols != column_count) {
    throw Error(ErrorKind::parse_error, "unexpected column count " + std::to_string(cols));
  }
  traj.seed = get_u64(in);
  traj.sample_interval = get_f64(in);
  for (auto* col : {&traj.times, &traj.x, &traj.p, &traj.force}) {
    col->resize(n);
    for (auto& v : *col) v = get_f64(in);
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const auto old = out.precision(17);
  out << "t_s,x_m,p_kg_m_s,F_ph_N\n";
  for (std::size_t i = 0; i < traj.x.size(); ++i) {
    out << traj.times[i] << ',' << traj.x[i] << ',' << traj.p[i] << ',' << traj.force[i] << '\n';
  }
  out.precision(old);
}

void write_trajectory_binary(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  write_trajectory_binary(out, traj);
}

Trajectory read_trajectory_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  return read_trajectory_binary(in);
}

}  // namespace photocool
