#pragma once

#include "visloco/nn.hpp"

#include <map>
#include <string>
#include <vector>

namespace visloco::checkpoint {

// Versioned JSON dump of named parameter arrays with shape headers.
// Round-trips are bit-exact for doubles.
struct Meta {
    std::string architecture;
    int phase = 0;
    std::map<std::string, std::string> extra;
};

void save(const std::string& path, const std::vector<nn::ParamView>& views, const Meta& meta);

// Loads into an existing layout; throws on name/shape mismatch.
Meta load(const std::string& path, const std::vector<nn::ParamView>& views);

// Reads only the metadata block.
Meta peek(const std::string& path);

}  // namespace visloco::checkpoint
