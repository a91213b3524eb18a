#include "mosaic/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace mosaic {

std::string Rng::save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::load_state(const std::string& state) {
    std::istringstream is(state);
    std::mt19937_64 restored;
    is >> restored;
    if (is.fail()) {
        throw std::invalid_argument("corrupt RNG state");
    }
    engine_ = restored;
}

}  // namespace mosaic
