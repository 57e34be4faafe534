#pragma once

#include <json.hpp>

#include "icescope/ice.hpp"

// Curve bundle JSON:
//
//   {"grid": [G], "curves": [[G] x N], "pdp": [G], "observed_index": [N],
//    "meta": {"kind": "ice" | "cice" | "dice", "s_name": ..., "row_ids": [N],
//             "observed_x": [N], ...kind-specific fields}}
//
// For "dice" bundles "curves" holds the derivative curves, "pdp" their
// pointwise mean, and "sd_curve" the pointwise standard deviation.
namespace icescope {

nlohmann::json to_json(const IceCurves& ice);
nlohmann::json to_json(const CenteredIceCurves& cice);
nlohmann::json to_json(const DIceCurves& dice);

IceCurves ice_from_json(const nlohmann::json& j);
CenteredIceCurves cice_from_json(const nlohmann::json& j);
DIceCurves dice_from_json(const nlohmann::json& j);

}  // namespace icescope
