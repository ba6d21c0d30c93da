#pragma once

namespace twincount {

// Which branch of the twin architecture a sample belongs to.
enum class Domain { nat, syn };

inline const char* to_string(Domain d) { return d == Domain::nat ? "nat" : "syn"; }

}  // namespace twincount
