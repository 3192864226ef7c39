#pragma once

#include <string>

#include "ssm/model.hpp"
#include "ssm/spectral.hpp"

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(SSM_DATA_DIR) + "/" + name; }
inline ssm::PolyVectorField duffing() { return ssm::load_model(data("duffing_pair.json")); }
inline ssm::PolyVectorField linear() { return ssm::load_model(data("linear_pair.json")); }

}  // namespace fixtures
