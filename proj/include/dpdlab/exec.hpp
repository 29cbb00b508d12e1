#pragma once

namespace dpdlab {

/// serial is the reference path; parallel splits work over OpenMP threads
/// with a summation order that does not depend on the thread count.
enum class Exec { serial, parallel };

}  // namespace dpdlab
