#pragma once

#include <string>

#include "krca/time.hpp"

namespace krca {

// The error-message input to an analysis run.
struct Incident {
    std::string message;
    std::string ns;
    Timestamp timestamp = 0;
    std::string reason;      // optional
    std::string type_label;  // optional, used by eval corpora
};

}  // namespace krca
