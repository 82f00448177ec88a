#pragma once

namespace dexgrasp {

/// Entry point behind the `dexgrasp` binary. Exit codes: 0 success,
/// 2 usage error, 3 config error, 1 any other failure. Errors print one
/// machine-parsable line to stderr: "error: <category>: <message>".
int cli_dispatch(int argc, const char* const* argv);

}  // namespace dexgrasp
