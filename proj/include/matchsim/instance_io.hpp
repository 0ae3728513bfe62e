#pragma once
// JSON (de)serialization of market instances and design strings.
#include <string>

#include "matchsim/market.hpp"

namespace matchsim {

// accepts "two/nonseq-first" style labels and the long enum spellings
PlatformDesign parse_design(const std::string& text);
std::string design_direction_name(PlatformDesign::Direction d);
std::string design_timing_name(PlatformDesign::Timing t);

MarketInstance instance_from_json_text(const std::string& text);
std::string instance_to_json_text(const MarketInstance& inst);

MarketInstance load_instance(const std::string& path);
void save_instance(const MarketInstance& inst, const std::string& path);

}  // namespace matchsim
