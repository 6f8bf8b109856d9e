#pragma once

// Pinned SI constants. Outputs are bit-reproducible only if these never move.
namespace photocool::constants {

inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double k_boltzmann = 1.380649e-23; // J/K (exact)
inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

}  // namespace photocool::constants
