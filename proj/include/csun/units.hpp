#pragma once

#include <cmath>

namespace csun {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

inline double db_to_power_gain(double db) { return std::pow(10.0, db / 10.0); }

// amplitude gain, so gain^2 is the power gain
inline double db_to_amplitude_gain(double db) { return std::pow(10.0, db / 20.0); }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline double distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace csun
