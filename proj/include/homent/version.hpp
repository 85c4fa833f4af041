#pragma once

#include <string>

namespace homent {

inline constexpr const char* kVersion = "0.1.0";

std::string eigen_version();
std::string boost_version();
std::string ceres_version();

}  // namespace homent
