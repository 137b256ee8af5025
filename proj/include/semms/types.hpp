#ifndef SEMMS_TYPES_HPP
#define SEMMS_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace semms {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Family { Gaussian, Poisson, Binomial };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

/// Thrown when a fit breaks down numerically (as opposed to bad user
/// input, which raises std::invalid_argument).  The CLI maps this to
/// exit code 3.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace semms

#endif
