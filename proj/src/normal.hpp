#ifndef TSFORGE_SRC_NORMAL_HPP
#define TSFORGE_SRC_NORMAL_HPP

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace tsforge::detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

}  // namespace tsforge::detail

#endif  // TSFORGE_SRC_NORMAL_HPP
