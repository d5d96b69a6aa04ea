#ifndef BACR_SELFCHECK_HPP
#define BACR_SELFCHECK_HPP

#include <cstdint>
#include <ostream>

namespace bacr {

/// Quick gradient and invariant checks on random instances. Prints one line
/// per check and returns true when all pass.
bool run_self_checks(std::ostream& out, std::uint64_t seed = 7, int instances = 5);

}  // namespace bacr

#endif  // BACR_SELFCHECK_HPP
