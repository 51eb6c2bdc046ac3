#pragma once

#include <stdexcept>
#include <string>

namespace autofhe {

// Exit-code contract used by the CLI: 2 invalid input, 3 infeasibility,
// 4 integrity failure.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InfeasibleError : std::runtime_error {
    int op_index;
    explicit InfeasibleError(const std::string& msg, int op = -1)
        : std::runtime_error(msg), op_index(op) {}
};

struct NoPlacementError : InfeasibleError {
    using InfeasibleError::InfeasibleError;
};

struct FoldTargetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace autofhe
