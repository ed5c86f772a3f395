#pragma once

#include "gamesteer/sdp.hpp"

namespace gamesteer {

SdpSolution solve_admm(const SdpProblem& prob, const SdpOptions& opts);
SdpSolution solve_interior_point(const SdpProblem& prob, const SdpOptions& opts);

}  // namespace gamesteer
