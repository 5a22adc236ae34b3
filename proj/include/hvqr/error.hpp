#pragma once

#include <stdexcept>
#include <string>

namespace hvqr {

// Error categories map 1:1 onto CLI exit codes (see cli.hpp).
enum class ErrorKind {
    Ingest,      // malformed input files (KB, scene graphs, bundle, templates)
    Lex,         // bad lexeme in a layout string
    Parse,       // structural layout error, unparseable/ambiguous question
    Contract,    // API misuse (bad pattern arity, bad ratios, ...)
    Exec,        // execution failures (unknown entry, pair-cap overflow)
    Eval,        // scoring input problems (duplicate prediction ids, ...)
    Io,          // missing/unreadable/unwritable files
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace hvqr
