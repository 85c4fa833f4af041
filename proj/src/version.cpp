#include "homent/version.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <ceres/version.h>

namespace homent {

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

std::string boost_version() {
  return std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
         std::to_string(BOOST_VERSION % 100);
}

std::string ceres_version() { return CERES_VERSION_STRING; }

}  // namespace homent
