// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace clda {

/// First derivative of log Gamma. Throws std::domain_error for x <= 0.
double digamma(double x);

/// Second derivative of log Gamma. Throws std::domain_error for x <= 0.
double trigamma(double x);

/// Third derivative of log Gamma. Throws std::domain_error for x <= 0.
double tetragamma(double x);

}  // namespace clda
