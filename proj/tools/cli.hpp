#pragma once

namespace acfclust::cli {

// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace acfclust::cli
