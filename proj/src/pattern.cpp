#include "slsim/pattern.hpp"

#include <cmath>

#include "slsim/errors.hpp"

namespace slsim {

void validate_pattern(const ImageD& pattern) {
    if (pattern.width <= 0 || pattern.height <= 0)
        throw config_error("pattern: empty image");
    if (pattern.channels != 1 && pattern.channels != 3)
        throw config_error("pattern: expected 1 or 3 channels");
    for (double v : pattern.data) {
        if (!std::isfinite(v))
            throw config_error("pattern: non-finite value");
        if (v < 0.0)
            throw config_error("pattern: negative emission value");
    }
}

} // namespace slsim
