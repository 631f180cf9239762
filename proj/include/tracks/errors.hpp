#pragma once

#include <stdexcept>
#include <string>

namespace tracks {

/// Invalid scenario or configuration. Maps to exit status 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace tracks
