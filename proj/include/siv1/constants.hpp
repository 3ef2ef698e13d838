#pragma once

#include <numbers>

// CODATA 2018 values, SI units.
namespace siv1::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double e_charge = 1.602176634e-19;      // C
inline constexpr double epsilon0 = 8.8541878128e-12;     // F/m
inline constexpr double c_light = 299792458.0;           // m/s
inline constexpr double m_electron = 9.1093837015e-31;   // kg
inline constexpr double k_boltzmann = 1.380649e-23;      // J/K
inline constexpr double electron_volt = 1.602176634e-19; // J
inline constexpr double angstrom = 1e-10;                // m

/// Ordinary frequency in MHz to angular frequency in rad/ns.
inline constexpr double mhz_to_rad_per_ns = 2.0 * pi * 1e-3;

}  // namespace siv1::constants
