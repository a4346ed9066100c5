#pragma once

#include <string>

#include "cefr/container.hpp"
#include "cefr/metric_head.hpp"

namespace cefr {

Container to_container(const PrototypeModel& model);
PrototypeModel prototype_model_from_container(const Container& c);

void save_model(const std::string& path, const PrototypeModel& model);
PrototypeModel load_model(const std::string& path);

// Human-readable mirror of the binary file (header fields plus matrices as nested arrays).
nlohmann::json model_to_json(const PrototypeModel& model);

}  // namespace cefr
